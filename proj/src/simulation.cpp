#include "lwvm/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "lwvm/io.hpp"
#include "lwvm/parallel.hpp"

namespace lwvm {

namespace {

constexpr double kPi = std::numbers::pi;

// weights for int_0^{n dt} g(s) ds on the slice nodes s_k = k dt
std::vector<double> time_weights(int n, double dt) {
    std::vector<double> w(n + 1, 0.0);
    if (n == 0) return w;
    if (n == 1) {
        w[0] = w[1] = 0.5 * dt;
        return w;
    }
    const int simpson_end = (n % 2 == 0) ? n : n - 3;
    for (int k = 0; k + 2 <= simpson_end; k += 2) {
        w[k] += dt / 3.0;
        w[k + 1] += 4.0 * dt / 3.0;
        w[k + 2] += dt / 3.0;
    }
    if (simpson_end != n) {
        const double c = 3.0 * dt / 8.0;
        w[n - 3] += c;
        w[n - 2] += 3.0 * c;
        w[n - 1] += 3.0 * c;
        w[n] += c;
    }
    return w;
}

double momentum_box(const InitialData& d, const SimulationConfig& cfg) {
    cfg.validate();
    if (!d.f || !d.e) throw std::invalid_argument("simulation: initial data incomplete");
    return cfg.momentum_half_width > 0.0 ? cfg.momentum_half_width : 1.1 * d.f->xi_radius();
}

} // namespace

void SimulationConfig::validate() const {
    if (grid_n < 6) throw std::invalid_argument("simulation: grid_n must be at least 6");
    if (!(half_width > 0.0)) throw std::invalid_argument("simulation: half_width must be positive");
    if (steps < 1) throw std::invalid_argument("simulation: steps must be at least 1");
    if (!(tau > 0.0)) throw std::invalid_argument("simulation: tau must be positive");
    if (momentum_order < 4) throw std::invalid_argument("simulation: momentum_order must be at least 4");
    if (momentum_half_width < 0.0) throw std::invalid_argument("simulation: momentum_half_width must be nonnegative");
    if (!(sphere_density > 0.0)) throw std::invalid_argument("simulation: sphere_density must be positive");
    if (min_sphere_order < 4) throw std::invalid_argument("simulation: min_sphere_order must be at least 4");
    if (corrector_iterations < 0) throw std::invalid_argument("simulation: corrector_iterations must be nonnegative");
    if (characteristic_step < 0.0) throw std::invalid_argument("simulation: characteristic_step must be nonnegative");
    if (diagnostic_margin < 0.0 || diagnostic_margin >= half_width)
        throw std::invalid_argument("simulation: diagnostic_margin must lie in [0, half_width)");
    if (ensemble_size == 0) throw std::invalid_argument("simulation: ensemble_size must be positive");
}

std::vector<double> finite_difference_weights(double x0, std::span<const double> xs, int order) {
    const int n = static_cast<int>(xs.size());
    if (n <= order) throw std::invalid_argument("finite_difference_weights: too few nodes");
    // c[j][k]: weight of node j for the k-th derivative
    std::vector<std::vector<double>> c(n, std::vector<double>(order + 1, 0.0));
    double c1 = 1.0, c4 = xs[0] - x0;
    c[0][0] = 1.0;
    for (int i = 1; i < n; ++i) {
        const int mn = std::min(i, order);
        double c2 = 1.0;
        const double c5 = c4;
        c4 = xs[i] - x0;
        for (int j = 0; j < i; ++j) {
            const double c3 = xs[i] - xs[j];
            c2 *= c3;
            if (j == i - 1) {
                for (int k = mn; k >= 1; --k) c[i][k] = c1 * (k * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for (int k = mn; k >= 1; --k) c[j][k] = (c4 * c[j][k] - k * c[j][k - 1]) / c3;
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    std::vector<double> w(n);
    for (int j = 0; j < n; ++j) w[j] = c[j][order];
    return w;
}

double grid_derivative(const Grid3& g, std::span<const double> data, int i, int j, int k, int axis) {
    const int idx[3] = {i, j, k};
    const int n = g.n();
    const int p = idx[axis];
    auto at = [&](int off) {
        int q[3] = {i, j, k};
        q[axis] = p + off;
        return data[g.index(q[0], q[1], q[2])];
    };
    const double h = g.h();
    if (p >= 2 && p <= n - 3) return (-at(2) + 8.0 * at(1) - 8.0 * at(-1) + at(-2)) / (12.0 * h);
    if (p >= 1 && p <= n - 2) return (at(1) - at(-1)) / (2.0 * h);
    if (p == 0) return (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h);
    return (3.0 * at(0) - 4.0 * at(-1) + at(-2)) / (2.0 * h);
}

Simulation::Simulation(InitialData data, SimulationConfig cfg)
    : data_(std::move(data)),
      cfg_(cfg),
      grid_(cfg.grid_n, cfg.half_width),
      rule_(momentum_box(data_, cfg), cfg.momentum_order) {
    if (data_.b) throw std::invalid_argument("simulation: nonzero initial magnetic field is not supported");
    history_ = std::make_shared<FieldHistory>(grid_);
    std::shared_ptr<const ForceField> k;
    if (cfg_.self_consistent)
        k = history_;
    else
        k = std::make_shared<ZeroForce>();
    const double step = cfg_.characteristic_step > 0.0 ? cfg_.characteristic_step : cfg_.dt();
    f_ = std::make_shared<PhaseDensity>(data_.f, k, step);
    Rng rng(cfg_.seed);
    tracker_ = std::make_unique<SupportTracker>(seed_ensemble(*data_.f, cfg_.ensemble_size, rng));

    pad_ = static_cast<int>(std::ceil(cfg_.tau / grid_.h())) + 3;
    spheres_.emplace_back();  // k = 0 carries zero weight
    shells_.emplace_back();
    DensitySlice d0;
    bool outside = false;
    compute_densities(0.0, d0, outside);
    slices_.push_back(std::move(d0));
    assemble(0.0, current_);
    history_->push({0.0, [&] {
                        std::vector<std::array<double, 6>> eb(grid_.size());
                        for (std::size_t q = 0; q < eb.size(); ++q)
                            eb[q] = {current_.e[q][0], current_.e[q][1], current_.e[q][2],
                                     current_.b[q][0], current_.b[q][1], current_.b[q][2]};
                        return eb;
                    }()});
    prev_gauge_.assign(grid_.size(), 0.0);
    records_.push_back(diagnostics(outside));
}

bool Simulation::in_diagnostic_region(std::size_t idx) const {
    const Vec3 p = grid_.point(idx);
    const double lim = cfg_.half_width - cfg_.diagnostic_margin + 1e-12;
    return std::abs(p[0]) <= lim && std::abs(p[1]) <= lim && std::abs(p[2]) <= lim;
}

const SphereRule& Simulation::sphere_for(int k) {
    while (static_cast<int>(spheres_.size()) <= k) {
        const double s = static_cast<double>(spheres_.size()) * cfg_.dt();
        const int p = std::max(cfg_.min_sphere_order, static_cast<int>(std::ceil(cfg_.sphere_density * s / grid_.h())));
        spheres_.emplace_back(p, 2 * p);
        shells_.push_back(make_shell(spheres_.back(), s));
    }
    return spheres_[k];
}

// Sphere nodes of radius s around a node, spread onto grid offsets with
// tricubic Lagrange weights. The offsets do not depend on the node, so the
// retarded sums become fixed stencils on the zero-padded grid.
Simulation::Shell Simulation::make_shell(const SphereRule& sphere, double s) const {
    Shell sh;
    if (s == 0.0) return sh;
    const double h = grid_.h();
    const int m = static_cast<int>(std::ceil(s / h)) + 2;
    const int w = 2 * m + 1;
    const std::ptrdiff_t np = grid_.n() + 2 * pad_;
    std::vector<double> dense(static_cast<std::size_t>(w) * w * w, 0.0);
    auto cubic = [](double u) {
        return std::array<double, 4>{-u * (u - 1) * (u - 2) / 6.0, (u + 1) * (u - 1) * (u - 2) / 2.0,
                                     -(u + 1) * u * (u - 2) / 2.0, (u + 1) * u * (u - 1) / 6.0};
    };
    for (const auto& node : sphere.nodes()) {
        int base[3];
        std::array<double, 4> lw[3];
        for (int a = 0; a < 3; ++a) {
            const double d = -s * node.omega[a] / h;
            const double fl = std::floor(d);
            base[a] = static_cast<int>(fl) - 1;
            lw[a] = cubic(d - fl);
        }
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b)
                for (int c = 0; c < 4; ++c)
                    dense[(static_cast<std::size_t>(base[0] + a + m) * w + (base[1] + b + m)) * w + (base[2] + c + m)] +=
                        node.weight * lw[0][a] * lw[1][b] * lw[2][c];
    }
    for (int a = 0; a < w; ++a)
        for (int b = 0; b < w; ++b)
            for (int c = 0; c < w; ++c) {
                const double v = dense[(static_cast<std::size_t>(a) * w + b) * w + c];
                if (v == 0.0) continue;
                sh.offset.push_back(((a - m) * np + (b - m)) * np + (c - m));
                sh.weight.push_back(v);
            }
    return sh;
}

void Simulation::compute_densities(double t, DensitySlice& out, bool& outside) const {
    const std::size_t n = grid_.size();
    out.rho.assign(n, 0.0);
    out.j.assign(n, Vec3{});
    std::vector<char> out_flag(n, 0);
    parallel_for(n, [&](std::size_t q) {
        const auto m = moment_densities(*f_, t, grid_.point(q), rule_);
        out.rho[q] = m.rho;
        out.j[q] = m.j;
        out_flag[q] = m.outside ? 1 : 0;
    });
    for (char c : out_flag) outside = outside || c;
}

void Simulation::assemble(double t, GridFields& g) {
    const int n = static_cast<int>(slices_.size()) - 1;
    const std::size_t size = grid_.size();
    const double dt = cfg_.dt();

    // rho, j and their time derivatives per slice, written into the padded buffer
    std::vector<double> times(n + 1);
    for (int m = 0; m <= n; ++m) times[m] = m * dt;
    const int gn = grid_.n();
    const std::ptrdiff_t np = gn + 2 * pad_;
    auto padded = [&](int i, int j, int k) { return ((i + pad_) * np + (j + pad_)) * np + (k + pad_); };
    std::vector<std::array<double, 8>> buf(static_cast<std::size_t>(np * np * np), std::array<double, 8>{});
    auto load = [&](int m) {
        std::vector<double> w;
        int first = 0;
        if (n >= 1) {
            const int count = std::min(5, n + 1);
            first = std::clamp(m - 2, 0, n + 1 - count);
            w = finite_difference_weights(times[m], std::span<const double>(times).subspan(first, count), 1);
        }
        parallel_for(size, [&](std::size_t q) {
            const int i = static_cast<int>(q / (gn * gn)), j = static_cast<int>((q / gn) % gn), k = static_cast<int>(q % gn);
            auto& p = buf[padded(i, j, k)];
            p = {slices_[m].rho[q], slices_[m].j[q][0], slices_[m].j[q][1], slices_[m].j[q][2], 0, 0, 0, 0};
            for (std::size_t r = 0; r < w.size(); ++r) {
                const auto& s = slices_[first + r];
                p[4] += w[r] * s.rho[q];
                for (int a = 0; a < 3; ++a) p[5 + a] += w[r] * s.j[q][a];
            }
        });
    };
    const auto tw = time_weights(n, dt);
    for (int k = 1; k <= n; ++k) sphere_for(k);
    const SphereRule& outer = n >= 1 ? spheres_[n] : sphere_for(1);

    g.t = t;
    g.rho = slices_[n].rho;
    g.j = slices_[n].j;
    std::vector<std::array<double, 8>> acc(size, std::array<double, 8>{});
    std::vector<std::array<double, 4>> layer(size, std::array<double, 4>{});
    for (int k = 1; k <= n; ++k) {
        load(n - k);
        const double c = tw[k] * k * dt / (4.0 * kPi);
        const Shell& sh = shells_[k];
        parallel_for(size, [&](std::size_t q) {
            const int i = static_cast<int>(q / (gn * gn)), j = static_cast<int>((q / gn) % gn), kk = static_cast<int>(q % gn);
            const std::ptrdiff_t base = padded(i, j, kk);
            std::array<double, 8> v{};
            for (std::size_t o = 0; o < sh.offset.size(); ++o) {
                const auto& d = buf[base + sh.offset[o]];
                const double w = sh.weight[o];
                for (int r = 0; r < 8; ++r) v[r] += w * d[r];
            }
            for (int r = 0; r < 8; ++r) acc[q][r] += c * v[r];
            // d_t of the upper limit brings in the initial slice on the sphere of radius t
            if (k == n)
                for (int r = 0; r < 4; ++r) layer[q][r] = v[r];
        });
    }

    g.phi.assign(size, 0.0);
    g.dt_phi.assign(size, 0.0);
    g.a.assign(size, Vec3{});
    g.dt_a.assign(size, Vec3{});
    parallel_for(size, [&](std::size_t q) {
        const auto h0 = homogeneous_field(data_, t, grid_.point(q), outer);
        g.phi[q] = acc[q][0];
        g.dt_phi[q] = acc[q][4] + t / (4.0 * kPi) * layer[q][0];
        for (int a = 0; a < 3; ++a) {
            g.a[q][a] = h0.a0[a] + acc[q][1 + a];
            g.dt_a[q][a] = h0.dt_a0[a] + acc[q][5 + a] + t / (4.0 * kPi) * layer[q][1 + a];
        }
    });

    // fields and constraint residuals by finite differences on the grid
    std::array<std::vector<double>, 3> ac, ec;
    for (int a = 0; a < 3; ++a) {
        ac[a].resize(size);
        for (std::size_t q = 0; q < size; ++q) ac[a][q] = g.a[q][a];
    }
    g.e.assign(size, Vec3{});
    g.b.assign(size, Vec3{});
    g.gauge.assign(size, 0.0);
    parallel_for(size, [&](std::size_t q) {
        const int i = static_cast<int>(q / (gn * gn)), j = static_cast<int>((q / gn) % gn), k = static_cast<int>(q % gn);
        Mat3 da{};  // [a][b] = d_b A_a
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b) da[a][b] = grid_derivative(grid_, ac[a], i, j, k, b);
        for (int b = 0; b < 3; ++b) g.e[q][b] = -g.dt_a[q][b] - grid_derivative(grid_, g.phi, i, j, k, b);
        g.b[q] = {da[2][1] - da[1][2], da[0][2] - da[2][0], da[1][0] - da[0][1]};
        g.gauge[q] = g.dt_phi[q] + da[0][0] + da[1][1] + da[2][2];
    });
    std::array<std::vector<double>, 3> bc;
    for (int a = 0; a < 3; ++a) {
        ec[a].resize(size);
        bc[a].resize(size);
        for (std::size_t q = 0; q < size; ++q) {
            ec[a][q] = g.e[q][a];
            bc[a][q] = g.b[q][a];
        }
    }
    g.div_e_minus_rho.assign(size, 0.0);
    g.div_b.assign(size, 0.0);
    const double h = grid_.h();
    parallel_for(size, [&](std::size_t q) {
        const int i = static_cast<int>(q / (gn * gn)), j = static_cast<int>((q / gn) % gn), k = static_cast<int>(q % gn);
        double div = 0.0;
        for (int a = 0; a < 3; ++a) div += grid_derivative(grid_, ec[a], i, j, k, a);
        g.div_e_minus_rho[q] = div - g.rho[q];
        if (i + 1 < gn && j + 1 < gn && k + 1 < gn) {
            // net flux of face-averaged B out of the cell [i, i+1] x [j, j+1] x [k, k+1]
            double flux = 0.0;
            for (int a = 0; a < 3; ++a) {
                double hi = 0.0, lo = 0.0;
                for (int u = 0; u < 2; ++u)
                    for (int w = 0; w < 2; ++w) {
                        int c[3];
                        c[a] = 0;
                        c[(a + 1) % 3] = u;
                        c[(a + 2) % 3] = w;
                        lo += bc[a][grid_.index(i + c[0], j + c[1], k + c[2])];
                        c[a] = 1;
                        hi += bc[a][grid_.index(i + c[0], j + c[1], k + c[2])];
                    }
                flux += 0.25 * (hi - lo) * h * h;
            }
            g.div_b[q] = flux / (h * h * h);
        }
    });
}

void Simulation::step() {
    if (finished()) throw std::logic_error("simulation: all steps done");
    ++n_;
    const double t = n_ * cfg_.dt();
    auto to_slice = [&] {
        FieldSlice s{t, std::vector<std::array<double, 6>>(grid_.size())};
        for (std::size_t q = 0; q < s.eb.size(); ++q)
            s.eb[q] = {current_.e[q][0], current_.e[q][1], current_.e[q][2],
                       current_.b[q][0], current_.b[q][1], current_.b[q][2]};
        return s;
    };
    bool outside = false;
    DensitySlice d;
    compute_densities(t, d, outside);
    slices_.push_back(std::move(d));
    assemble(t, current_);
    history_->push(to_slice());
    const int correctors = cfg_.self_consistent ? cfg_.corrector_iterations : 0;
    for (int c = 0; c < correctors; ++c) {
        outside = false;
        compute_densities(t, slices_.back(), outside);
        assemble(t, current_);
        history_->replace_last(to_slice());
    }
    tracker_->advance(cfg_.dt(), f_->force());
    records_.push_back(diagnostics(outside));
}

void Simulation::run(const std::function<void(const Simulation&)>& after_step) {
    while (!finished()) {
        step();
        if (after_step) after_step(*this);
    }
}

StepRecord Simulation::diagnostics(bool outside) {
    StepRecord r;
    r.t = current_.t;
    r.outside = outside;
    const int gn = grid_.n();
    const std::size_t size = grid_.size();
    const double dt = cfg_.dt();

    std::array<std::vector<double>, 3> ec;
    for (int a = 0; a < 3; ++a) {
        ec[a].resize(size);
        for (std::size_t q = 0; q < size; ++q) ec[a][q] = current_.e[q][a];
    }
    double dtg = 0.0, stencil = 0.0;
    for (std::size_t q = 0; q < size; ++q) {
        r.rho_max = std::max(r.rho_max, std::abs(current_.rho[q]));
        r.eb_sup = std::max(r.eb_sup, norm(current_.e[q]) + norm(current_.b[q]));
        if (!in_diagnostic_region(q)) continue;
        const int i = static_cast<int>(q / (gn * gn)), j = static_cast<int>((q / gn) % gn), k = static_cast<int>(q % gn);
        r.gauge = std::max(r.gauge, std::abs(current_.gauge[q]));
        r.div_e_minus_rho = std::max(r.div_e_minus_rho, std::abs(current_.div_e_minus_rho[q]));
        if (i + 1 < gn && j + 1 < gn && k + 1 < gn && in_diagnostic_region(grid_.index(i + 1, j + 1, k + 1)))
            r.div_b = std::max(r.div_b, std::abs(current_.div_b[q]));
        if (n_ > 0) dtg = std::max(dtg, std::abs(current_.gauge[q] - prev_gauge_[q]) / dt);
        // the same fourth-order stencil with step 2h
        const int idx[3] = {i, j, k};
        bool wide = true;
        for (int a = 0; a < 3; ++a) wide = wide && idx[a] >= 4 && idx[a] <= gn - 5;
        if (wide) {
            double d2 = 0.0, d1 = 0.0;
            for (int a = 0; a < 3; ++a) {
                auto at = [&](int off) {
                    int c[3] = {i, j, k};
                    c[a] += off;
                    return ec[a][grid_.index(c[0], c[1], c[2])];
                };
                d2 += (-at(4) + 8.0 * at(2) - 8.0 * at(-2) + at(-4)) / (24.0 * grid_.h());
                d1 += grid_derivative(grid_, ec[a], i, j, k, a);
            }
            stencil = std::max(stencil, std::abs(d2 - d1));
        }
    }
    r.div_e_estimate = dtg + stencil;
    prev_gauge_ = current_.gauge;

    std::array<std::vector<double>, 3> bc;
    for (int a = 0; a < 3; ++a) {
        bc[a].resize(size);
        for (std::size_t q = 0; q < size; ++q) bc[a][q] = current_.b[q][a];
    }
    for (std::size_t q = 0; q < size; ++q) {
        const int i = static_cast<int>(q / (gn * gn)), j = static_cast<int>((q / gn) % gn), k = static_cast<int>(q % gn);
        double ge = 0.0, gb = 0.0;
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b) {
                ge += std::pow(grid_derivative(grid_, ec[a], i, j, k, b), 2);
                gb += std::pow(grid_derivative(grid_, bc[a], i, j, k, b), 2);
            }
        r.grad_eb_sup = std::max(r.grad_eb_sup, std::sqrt(ge) + std::sqrt(gb));
    }

    const auto& hist = tracker_->history().back();
    r.support_radius = hist.radius;
    r.r_star = hist.r_star;
    const auto pts = tracker_->ensemble();
    std::vector<double> vals(pts.size());
    parallel_for(pts.size(), [&](std::size_t q) { vals[q] = f_->evaluate(r.t, pts[q].x, pts[q].xi).value; });
    for (double v : vals) r.f_sup = std::max(r.f_sup, v);
    // the first ensemble point is the argmax of f^in pushed forward
    r.max_principle_deviation = std::abs(vals.front() - data_.f->sup());
    return r;
}

void write_field_csv(std::ostream& os, const Grid3& grid, const GridFields& g, bool header) {
    if (header) os << "t,x1,x2,x3,E1,E2,E3,B1,B2,B3,divE_minus_rho,divB,gauge_residual\n";
    for (std::size_t q = 0; q < grid.size(); ++q) {
        const Vec3 x = grid.point(q);
        os << fmt17(g.t);
        for (int a = 0; a < 3; ++a) os << ',' << fmt17(x[a]);
        for (int a = 0; a < 3; ++a) os << ',' << fmt17(g.e[q][a]);
        for (int a = 0; a < 3; ++a) os << ',' << fmt17(g.b[q][a]);
        os << ',' << fmt17(g.div_e_minus_rho[q]) << ',' << fmt17(g.div_b[q]) << ',' << fmt17(g.gauge[q]) << '\n';
    }
}

} // namespace lwvm
