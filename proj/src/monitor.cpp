#include "lwvm/monitor.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "lwvm/io.hpp"
#include "lwvm/parallel.hpp"

namespace lwvm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kMarginTolerance = 1e-2;

// p points on [c - h, c + h], ends included
double lattice(double c, double h, int i, int p) { return p == 1 ? c : c - h + 2.0 * h * i / (p - 1); }

double frobenius(const Mat3& m) {
    double s = 0.0;
    for (const auto& row : m)
        for (double v : row.c) s += v * v;
    return std::sqrt(s);
}

std::vector<double> cumulative_trapezoid(std::span<const double> t, std::span<const double> g) {
    std::vector<double> out(t.size(), 0.0);
    for (std::size_t k = 1; k < t.size(); ++k) out[k] = out[k - 1] + 0.5 * (t[k] - t[k - 1]) * (g[k] + g[k - 1]);
    return out;
}

std::size_t early_end(std::size_t n) { return std::max<std::size_t>(1, (n - 1) / 2); }

// smallest c with lhs_k <= base_k + c rhs_k for k >= 1
InequalityFit fit(std::string name, std::span<const double> lhs, std::span<const double> base,
                  std::span<const double> rhs) {
    InequalityFit r;
    r.name = std::move(name);
    const std::size_t n = lhs.size();
    const std::size_t mid = early_end(n);
    auto needed = [&](std::size_t k) {
        const double excess = lhs[k] - base[k];
        if (excess <= 0.0) return 0.0;
        return rhs[k] > 0.0 ? excess / rhs[k] : kInf;
    };
    for (std::size_t k = 1; k < n; ++k) {
        const double c = needed(k);
        r.c = std::max(r.c, c);
        if (k <= mid) r.c_early = std::max(r.c_early, c);
    }
    r.finite = std::isfinite(r.c);
    r.margin = 0.0;
    for (std::size_t k = mid + 1; k < n; ++k) {
        const double bound = base[k] + (std::isfinite(r.c_early) ? r.c_early * rhs[k] : kInf);
        double m;
        if (!std::isfinite(bound))
            m = 0.0;
        else if (bound > 0.0)
            m = (bound - lhs[k]) / bound;
        else
            m = lhs[k] > 0.0 ? -kInf : 0.0;
        r.margin = std::min(r.margin, m);
    }
    r.pass = r.finite && r.margin >= -kMarginTolerance;
    return r;
}

void check_entry(const NormEntry& e) {
    const double v[] = {e.t, e.rf, e.f_sup, e.gradf_sup, e.eb_sup, e.grad_eb_sup, e.i1, e.iv, e.j1, e.jv, e.fd_gap};
    for (double x : v)
        if (!(x >= 0.0) || !std::isfinite(x)) throw std::invalid_argument("NormSeries: entries must be finite and nonnegative");
}

nlohmann::ordered_json number(double x) {
    if (std::isfinite(x)) return x;
    return nullptr;
}

nlohmann::ordered_json fit_json(const InequalityFit& f) {
    nlohmann::ordered_json j;
    j["name"] = f.name;
    j["c"] = number(f.c);
    j["c_early"] = number(f.c_early);
    j["finite"] = f.finite;
    j["margin"] = number(f.margin);
    j["pass"] = f.pass;
    return j;
}

} // namespace

SupNorms sup_norm_estimates(const PhaseDensity& f, const FieldHistory* fields, double t,
                            const SupNormLattice& lat) {
    if (lat.x_points < 1 || lat.xi_points < 1) throw std::invalid_argument("sup_norm_estimates: lattice needs points");
    if (!(lat.fd_step > 0.0)) throw std::invalid_argument("sup_norm_estimates: fd_step must be positive");
    if (t < 0.0) throw std::domain_error("sup_norm_estimates: negative time");
    const auto& fin = f.initial();
    const Vec3 xc = fin.x_center();
    const double xh = fin.x_radius() + t;
    const double ph = fin.xi_radius() + t * f.force().bound(t);
    const int px = lat.x_points, pp = lat.xi_points;
    const std::size_t nx = static_cast<std::size_t>(px) * px * px;

    std::vector<SupNorms> slot(nx);
    parallel_for(nx, [&](std::size_t q) {
        const int a = static_cast<int>(q / (px * px)), b = static_cast<int>((q / px) % px), c = static_cast<int>(q % px);
        const Vec3 x{lattice(xc[0], xh, a, px), lattice(xc[1], xh, b, px), lattice(xc[2], xh, c, px)};
        SupNorms& s = slot[q];
        for (int i = 0; i < pp; ++i)
            for (int j = 0; j < pp; ++j)
                for (int k = 0; k < pp; ++k) {
                    const Vec3 xi{lattice(0.0, ph, i, pp), lattice(0.0, ph, j, pp), lattice(0.0, ph, k, pp)};
                    if (f.certainly_zero(t, x, xi)) continue;
                    s.f_sup = std::max(s.f_sup, std::abs(f.evaluate(t, x, xi).value));
                    const auto g = f.gradient(t, x, xi, lat.fd_step);
                    s.gradf_sup = std::max(s.gradf_sup, std::sqrt(dot(g.dx, g.dx) + dot(g.dxi, g.dxi)));
                }
        if (!fields || fields->slices() == 0) return;
        Vec3 e, bb;
        if (!fields->fields(t, x, e, bb)) return;
        s.eb_sup = norm(e) + norm(bb);
        const double h = fields->grid().h();
        Mat3 de{}, db{};
        for (int d = 0; d < 3; ++d) {
            Vec3 step{};
            step[d] = h;
            Vec3 ep, bp, em, bm;
            if (!fields->fields(t, x + step, ep, bp) || !fields->fields(t, x - step, em, bm)) return;
            for (int r = 0; r < 3; ++r) {
                de[r][d] = (ep[r] - em[r]) / (2 * h);
                db[r][d] = (bp[r] - bm[r]) / (2 * h);
            }
        }
        s.grad_eb_sup = frobenius(de) + frobenius(db);
    });
    SupNorms out;
    if (fin.sup() > 0.0) {
        // the forward image of the argmax keeps the f part exact for a conserved maximum
        const auto peak = t > 0.0 ? integrate_characteristic(fin.argmax(), 0.0, t, f.max_step(), f.force()) : fin.argmax();
        out.f_sup = std::abs(f.evaluate(t, peak.x, peak.xi).value);
    }
    for (const auto& s : slot) {
        out.f_sup = std::max(out.f_sup, s.f_sup);
        out.gradf_sup = std::max(out.gradf_sup, s.gradf_sup);
        out.eb_sup = std::max(out.eb_sup, s.eb_sup);
        out.grad_eb_sup = std::max(out.grad_eb_sup, s.grad_eb_sup);
    }
    return out;
}

DerivativeNorms derivative_norms(const PhaseDensity& f, double t, double grad_f_norm, const DerivativeMonitor& opt) {
    if (t < 0.0) throw std::domain_error("derivative_norms: negative time");
    if (opt.x_points < 1 || opt.momentum_order < 1) throw std::invalid_argument("derivative_norms: bad resolution");
    DerivativeNorms out;
    const auto& fin = f.initial();
    if (fin.sup() == 0.0) return out;
    const double box = opt.momentum_half_width > 0.0 ? opt.momentum_half_width : 1.1 * fin.xi_radius();
    const MomentumQuadrature rule(box, opt.momentum_order);
    const double r_star = fin.xi_radius() + t * f.force().bound(t);
    const MomentSpec ms[4] = {MomentSpec(MomentSpec::Kind::one, r_star), MomentSpec(MomentSpec::Kind::v1, r_star),
                              MomentSpec(MomentSpec::Kind::v2, r_star), MomentSpec(MomentSpec::Kind::v3, r_star)};

    const int p = opt.x_points;
    const Vec3 xc = fin.x_center();
    const double xh = fin.x_radius() + t;
    std::vector<Vec3> pts;
    for (int a = 0; a < p; ++a)
        for (int b = 0; b < p; ++b)
            for (int c = 0; c < p; ++c) {
                auto at = [&](int i, int d) { return xc[d] + xh * (2.0 * (i + 0.5) / p - 1.0); };
                pts.push_back({at(a, 0), at(b, 1), at(c, 2)});
            }

    if (t == 0.0) {
        // d_t^2 int m u dxi = int m f^in dxi; everything else vanishes
        for (const auto& x : pts) {
            double s[4] = {0, 0, 0, 0};
            for (const auto& n : rule.nodes()) {
                const double v = fin.value(x, n.xi);
                if (v == 0.0) continue;
                for (int q = 0; q < 4; ++q) s[q] += n.weight * ms[q].value(n.xi) * v;
            }
            out.j1 = std::max(out.j1, std::abs(s[0]));
            for (int q = 1; q < 4; ++q) out.jv = std::max(out.jv, std::abs(s[q]));
        }
        return out;
    }

    const FieldRepresentation rep(f, rule, opt.orders);
    std::size_t best = 0;
    std::array<double, 4> best_d1{};
    for (std::size_t i = 0; i < pts.size(); ++i) {
        for (int q = 0; q < 4; ++q) {
            const auto d1 = rep.first(ms[q], t, pts[i]);
            double im = 0.0;
            for (double v : d1.total) im = std::max(im, std::abs(v));
            if (q == 0) {
                if (im > out.i1) {
                    best = i;
                    best_d1 = d1.total;
                }
                out.i1 = std::max(out.i1, im);
            } else {
                out.iv = std::max(out.iv, im);
            }
            if (grad_f_norm > 0.0) {
                const auto d2 = rep.second(ms[q], t, pts[i], grad_f_norm);
                double jm = 0.0;
                for (const auto& row : d2.total)
                    for (double v : row) jm = std::max(jm, std::abs(v));
                (q == 0 ? out.j1 : out.jv) = std::max(q == 0 ? out.j1 : out.jv, jm);
            }
        }
    }
    if (out.i1 > 0.0) {
        // fourth-order centred differences of the moment potential, in t and x
        const double h = std::min(0.02, 0.25 * t);
        const Vec3 x = pts[best];
        double gap = 0.0, scale = 0.0;
        for (int j = 0; j < 4; ++j) {
            auto at = [&](double s) {
                Vec3 y = x;
                double tt = t;
                if (j == 0)
                    tt += s;
                else
                    y[j - 1] += s;
                return rep.moment_potential(ms[0], tt, y);
            };
            const double fd = (-at(2 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2 * h)) / (12.0 * h);
            gap = std::max(gap, std::abs(fd - best_d1[j]));
            scale = std::max(scale, std::abs(fd));
        }
        out.fd_gap = scale > 0.0 ? gap / scale : 0.0;
    }
    return out;
}

void NormSeries::append(NormEntry e) {
    check_entry(e);
    if (!entries_.empty() && !(e.t > entries_.back().t))
        throw std::invalid_argument("NormSeries: times must increase");
    e.n = std::max(entries_.empty() ? 0.0 : entries_.back().n, e.gradf_sup);
    entries_.push_back(e);
    if (entries_.size() >= 2) {
        std::vector<double> t, n;
        for (const auto& x : entries_) {
            t.push_back(x.t);
            n.push_back(x.n);
        }
        entries_.back().fitted_c = log_gronwall_check(t, n, t.back()).log_gronwall.c;
    }
}

double ln_plus(double z) { return z > 1.0 ? std::log(z) : 0.0; }

double log_gronwall_bound(double n0, double c, double t) {
    if (n0 == 0.0) return 0.0;
    if (!std::isfinite(c)) return kInf;
    if (c == 0.0 || t <= 0.0) return n0;
    double y0 = 1.0 + ln_plus(n0);
    if (n0 < 1.0) {
        // below 1 the growth is exponential until N reaches 1
        const double t1 = -std::log(n0) / c;
        if (t <= t1) return n0 * std::exp(c * t);
        t -= t1;
        y0 = 1.0;
    }
    return std::exp(y0 * std::exp(c * t) - 1.0);
}

GronwallReport log_gronwall_check(std::span<const double> t, std::span<const double> n, double tau) {
    if (t.size() != n.size()) throw std::invalid_argument("log_gronwall_check: size mismatch");
    if (t.size() < 2) throw std::invalid_argument("log_gronwall_check: need at least two samples");
    const double dt = t[1] - t[0];
    if (!(dt > 0.0)) throw std::invalid_argument("log_gronwall_check: times must increase");
    for (std::size_t k = 1; k < t.size(); ++k)
        if (std::abs((t[k] - t[k - 1]) - dt) > 1e-9 * dt) throw std::invalid_argument("log_gronwall_check: time grid not uniform");
    for (double v : n)
        if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("log_gronwall_check: N must be finite and nonnegative");

    std::vector<double> g(n.size()), base(n.size(), n[0]);
    for (std::size_t k = 0; k < n.size(); ++k) g[k] = (1.0 + ln_plus(n[k])) * n[k];
    const auto integral = cumulative_trapezoid(t, g);

    GronwallReport r;
    r.log_gronwall = fit("log_gronwall", n, base, integral);
    r.bound_at_horizon = log_gronwall_bound(n[0], r.log_gronwall.c, tau - t[0]);
    r.diverging = !r.log_gronwall.pass;
    return r;
}

GronwallReport gronwall_report(const NormSeries& s, double tau) {
    const auto e = s.entries();
    std::vector<double> t, n, i1, iv, j1, jv;
    for (const auto& x : e) {
        t.push_back(x.t);
        n.push_back(x.n);
        i1.push_back(x.i1);
        iv.push_back(x.iv);
        j1.push_back(x.j1);
        jv.push_back(x.jv);
    }
    GronwallReport r = log_gronwall_check(t, n, tau);
    const std::vector<double> zero(e.size(), 0.0);
    std::vector<double> isum(e.size()), j11(e.size()), j1v(e.size());
    for (std::size_t k = 0; k < e.size(); ++k) {
        isum[k] = i1[k] + iv[k];
        j11[k] = 2.0 * j1[k];
        j1v[k] = j1[k] + jv[k];
    }
    const auto ii = cumulative_trapezoid(t, isum);
    const auto ij1 = cumulative_trapezoid(t, j11);
    const auto ijv = cumulative_trapezoid(t, j1v);
    std::vector<double> fi(e.size()), fj1(e.size()), fjv(e.size());
    for (std::size_t k = 0; k < e.size(); ++k) {
        fi[k] = 1.0 + ii[k];
        fj1[k] = 1.0 + ij1[k] + ln_plus(n[k]);
        fjv[k] = 1.0 + ijv[k] + ln_plus(n[k]);
    }
    r.others.push_back(fit("I_1", i1, zero, fi));
    r.others.push_back(fit("I_v", iv, zero, fi));
    r.others.push_back(fit("J_1", j1, zero, fj1));
    r.others.push_back(fit("J_v", jv, zero, fjv));
    return r;
}

ContinuationStatus continuation_report(const NormSeries& s, double tau, double rf_tolerance) {
    ContinuationStatus c;
    if (s.empty()) {
        c.status = "no data";
        return c;
    }
    const auto e = s.entries();
    c.rf_initial = e.front().rf;
    c.all_zero = true;
    for (const auto& x : e) {
        c.rf_sup = std::max(c.rf_sup, x.rf);
        c.f_norm_sup = std::max(c.f_norm_sup, x.f_sup + x.gradf_sup);
        c.eb_norm_sup = std::max(c.eb_norm_sup, x.eb_sup + x.grad_eb_sup);
        c.max_fd_gap = std::max(c.max_fd_gap, x.fd_gap);
        const double v[] = {x.rf, x.f_sup, x.gradf_sup, x.eb_sup, x.grad_eb_sup, x.i1, x.iv, x.j1, x.jv};
        for (double y : v) c.all_zero = c.all_zero && y == 0.0;
    }
    if (e.size() >= 2) {
        c.gronwall = gronwall_report(s, tau);
        c.norms_bounded = !c.gronwall.diverging && std::isfinite(c.gronwall.bound_at_horizon);
        for (const auto& f : c.gronwall.others) c.norms_bounded = c.norms_bounded && f.finite;
    }
    c.support_growing = c.rf_sup - c.rf_initial > rf_tolerance * std::max(c.rf_initial, 1e-300);
    if (c.all_zero)
        c.status = "zero data";
    else if (c.support_growing)
        c.status = "support growing";
    else if (c.norms_bounded)
        c.status = "R_f bounded & norms bounded";
    else
        c.status = "R_f bounded & norms growing";
    return c;
}

std::string continuation_json(const ContinuationStatus& c) {
    nlohmann::ordered_json j;
    j["status"] = c.status;
    j["rf_initial"] = number(c.rf_initial);
    j["rf_sup"] = number(c.rf_sup);
    j["support_growing"] = c.support_growing;
    j["f_w1inf_sup"] = number(c.f_norm_sup);
    j["eb_w1inf_sup"] = number(c.eb_norm_sup);
    j["norms_bounded"] = c.norms_bounded;
    j["all_zero"] = c.all_zero;
    j["max_fd_gap"] = number(c.max_fd_gap);
    nlohmann::ordered_json g;
    g["log_gronwall"] = fit_json(c.gronwall.log_gronwall);
    g["bound_at_horizon"] = number(c.gronwall.bound_at_horizon);
    g["diverging"] = c.gronwall.diverging;
    g["inequalities"] = nlohmann::ordered_json::array();
    for (const auto& f : c.gronwall.others) g["inequalities"].push_back(fit_json(f));
    j["gronwall"] = g;
    return j.dump(2) + "\n";
}

void write_norm_csv(std::ostream& os, const NormSeries& s, bool header) {
    if (header) os << "t,Rf,f_sup,gradf_sup,EB_sup,gradEB_sup,I_1,I_v,J_1,J_v,N,fitted_C\n";
    for (const auto& e : s.entries()) {
        const double v[] = {e.t, e.rf, e.f_sup, e.gradf_sup, e.eb_sup, e.grad_eb_sup, e.i1, e.iv, e.j1, e.jv, e.n, e.fitted_c};
        for (int i = 0; i < 12; ++i) os << (i ? "," : "") << fmt17(v[i]);
        os << '\n';
    }
}

NormSeries read_norm_csv(std::istream& is) {
    NormSeries s;
    std::string line;
    int lineno = 0;
    auto fail = [&](const std::string& what) {
        throw std::runtime_error("norm CSV line " + std::to_string(lineno) + ": " + what);
    };
    while (std::getline(is, line)) {
        ++lineno;
        if (lineno == 1) {
            if (line != "t,Rf,f_sup,gradf_sup,EB_sup,gradEB_sup,I_1,I_v,J_1,J_v,N,fitted_C") fail("unexpected header");
            continue;
        }
        if (line.empty()) continue;
        std::vector<double> v;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            char* end = nullptr;
            const double x = std::strtod(cell.c_str(), &end);
            if (cell.empty() || *end != '\0') fail("not a number: '" + cell + "'");
            v.push_back(x);
        }
        if (v.size() != 12) fail("expected 12 columns");
        NormEntry e;
        e.t = v[0];
        e.rf = v[1];
        e.f_sup = v[2];
        e.gradf_sup = v[3];
        e.eb_sup = v[4];
        e.grad_eb_sup = v[5];
        e.i1 = v[6];
        e.iv = v[7];
        e.j1 = v[8];
        e.jv = v[9];
        try {
            s.append(e);
        } catch (const std::invalid_argument& ex) {
            fail(ex.what());
        }
        const auto& back = s.entries().back();
        if (back.n != v[10]) fail("N column is not the running max of gradf_sup");
    }
    if (lineno == 0) fail("empty file");
    return s;
}

} // namespace lwvm
