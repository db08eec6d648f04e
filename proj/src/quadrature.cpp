#include "cdshedge/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>

namespace cdshedge {

namespace {

GaussLegendre build_rule(int n) {
    // Newton iteration on Legendre polynomials, nodes symmetric around 0.
    GaussLegendre r;
    r.nodes.resize(n);
    r.weights.resize(n);
    const double eps = 1e-15;
    int m = (n + 1) / 2;
    for (int i = 0; i < m; ++i) {
        double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 0; j < n; ++j) {
                double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
            }
            pp = n * (x * p0 - p1) / (x * x - 1.0);
            double dx = p0 / pp;
            x -= dx;
            if (std::abs(dx) < eps) break;
        }
        r.nodes[i] = -x;
        r.nodes[n - 1 - i] = x;
        double w = 2.0 / ((1.0 - x * x) * pp * pp);
        r.weights[i] = w;
        r.weights[n - 1 - i] = w;
    }
    return r;
}

} // namespace

const GaussLegendre& GaussLegendre::rule(int order) {
    static std::map<int, GaussLegendre> cache;
    static std::mutex mtx;
    std::lock_guard<std::mutex> lock(mtx);
    auto it = cache.find(order);
    if (it == cache.end()) it = cache.emplace(order, build_rule(order)).first;
    return it->second;
}

double integrate(const std::function<double(double)>& f, double a, double b,
                 int order) {
    if (a == b) return 0.0;
    const auto& r = GaussLegendre::rule(order);
    double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    double acc = 0.0;
    for (std::size_t i = 0; i < r.nodes.size(); ++i)
        acc += r.weights[i] * f(mid + half * r.nodes[i]);
    return acc * half;
}

namespace {

std::vector<double> split_points(double a, double b,
                                 const std::vector<double>& breaks) {
    std::vector<double> pts{a};
    for (double p : breaks)
        if (p > a && p < b) pts.push_back(p);
    pts.push_back(b);
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    return pts;
}

} // namespace

double integrate_panels(const std::function<double(double)>& f, double a,
                        double b, const std::vector<double>& breaks,
                        int order) {
    if (b <= a) return 0.0;
    auto pts = split_points(a, b, breaks);
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i)
        acc += integrate(f, pts[i], pts[i + 1], order);
    return acc;
}

double integrate_adaptive(const std::function<double(double)>& f, double a,
                          double b, const std::vector<double>& breaks,
                          double rel_tol, int initial_order, double abs_tol) {
    if (b <= a) return 0.0;
    auto pts = split_points(a, b, breaks);

    auto panels = [&](int order) {
        double acc = 0.0;
        for (std::size_t i = 0; i + 1 < pts.size(); ++i)
            acc += integrate(f, pts[i], pts[i + 1], order);
        return acc;
    };

    double prev = panels(initial_order);
    for (int order = 2 * initial_order; order <= 1024; order *= 2) {
        double cur = panels(order);
        double scale = std::max(std::abs(cur), std::abs(prev));
        if (std::abs(cur - prev) <= std::max(rel_tol * scale, abs_tol))
            return cur;
        prev = cur;
    }
    throw NumericsError("quadrature did not converge to requested tolerance");
}

} // namespace cdshedge
