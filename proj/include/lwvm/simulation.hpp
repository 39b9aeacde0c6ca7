#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <ostream>
#include <span>
#include <vector>

#include "lwvm/fields.hpp"
#include "lwvm/initial_data.hpp"
#include "lwvm/transport.hpp"

namespace lwvm {

struct SimulationConfig {
    int grid_n = 16;
    double half_width = 1.2;
    int steps = 20;
    double tau = 0.5;
    int momentum_order = 12;
    double momentum_half_width = 0.0;  // 0: 1.1 x the initial momentum support radius
    double sphere_density = 2.0;       // polar nodes per grid step of sphere radius
    int min_sphere_order = 4;
    int corrector_iterations = 1;
    bool self_consistent = true;       // false: K = 0, fields are still assembled
    double characteristic_step = 0.0;  // 0: dt
    double diagnostic_margin = 0.3;    // residual maxima skip this band next to the boundary
    std::size_t ensemble_size = 256;
    std::uint64_t seed = 1;

    double dt() const { return tau / steps; }
    void validate() const;
};

/// Node data at one time level.
struct GridFields {
    double t = 0.0;
    std::vector<double> rho;
    std::vector<Vec3> j;
    std::vector<double> phi, dt_phi;
    std::vector<Vec3> a, dt_a;
    std::vector<Vec3> e, b;
    std::vector<double> div_e_minus_rho;
    std::vector<double> gauge;   // d_t phi + div A
    std::vector<double> div_b;   // per node, from the fluxes of the cell whose low corner it is (0 on the far faces)
};

struct StepRecord {
    double t = 0.0;
    // maxima over nodes at least diagnostic_margin inside the cube
    double div_b = 0.0;
    double gauge = 0.0;
    double div_e_minus_rho = 0.0;
    double div_e_estimate = 0.0;  // discretization estimate for div E - rho
    double rho_max = 0.0;
    double eb_sup = 0.0;          // max |E| + |B| over the grid
    double grad_eb_sup = 0.0;     // max |grad E| + |grad B| (Frobenius) over the grid
    double support_radius = 0.0;
    double r_star = 0.0;
    double f_sup = 0.0;           // max of f over the forward-pushed ensemble
    double max_principle_deviation = 0.0;
    bool outside = false;         // some characteristic left the grid
};

/// Self-consistent march: at each step the densities at t_n are evaluated
/// with a linearly extrapolated force, fields are assembled from retarded
/// sums over the stored density slices, and the step is repeated with the
/// new field slice (corrector).
class Simulation {
public:
    Simulation(InitialData data, SimulationConfig cfg);

    void step();
    /// Runs the remaining steps; after_step is called after every completed step.
    void run(const std::function<void(const Simulation&)>& after_step = {});

    double time() const { return current_.t; }
    int step_index() const { return n_; }
    bool finished() const { return n_ >= cfg_.steps; }
    const SimulationConfig& config() const { return cfg_; }
    const Grid3& grid() const { return grid_; }
    const InitialData& data() const { return data_; }
    const GridFields& current() const { return current_; }
    std::span<const StepRecord> records() const { return records_; }
    const FieldHistory& history() const { return *history_; }
    const PhaseDensity& density() const { return *f_; }
    const SupportTracker& support() const { return *tracker_; }
    const MomentumQuadrature& momentum_rule() const { return rule_; }
    /// Whether a node lies at least diagnostic_margin inside the cube.
    bool in_diagnostic_region(std::size_t idx) const;

private:
    struct Shell {
        std::vector<std::ptrdiff_t> offset;  // into the padded grid
        std::vector<double> weight;
    };
    struct DensitySlice {
        std::vector<double> rho;
        std::vector<Vec3> j;
    };

    void compute_densities(double t, DensitySlice& out, bool& outside) const;
    void assemble(double t, GridFields& g);
    const SphereRule& sphere_for(int k);
    Shell make_shell(const SphereRule& sphere, double s) const;
    StepRecord diagnostics(bool outside);

    InitialData data_;
    SimulationConfig cfg_;
    Grid3 grid_;
    MomentumQuadrature rule_;
    std::shared_ptr<FieldHistory> history_;
    std::shared_ptr<PhaseDensity> f_;
    std::unique_ptr<SupportTracker> tracker_;
    std::vector<DensitySlice> slices_;
    std::vector<SphereRule> spheres_;  // indexed by the retarded step k
    std::vector<Shell> shells_;
    int pad_ = 0;                      // zero layers around the grid, enough for radius tau
    GridFields current_;
    std::vector<double> prev_gauge_;
    int n_ = 0;
    std::vector<StepRecord> records_;
};

/// Weights w such that sum w_i g(xs_i) approximates the derivative of the
/// given order at x0 (Fornberg's recursion).
std::vector<double> finite_difference_weights(double x0, std::span<const double> xs, int order);

/// d/dx_axis of node data: fourth-order centred in the interior, second-order
/// centred one node from the boundary, second-order one-sided on it.
double grid_derivative(const Grid3& g, std::span<const double> data, int i, int j, int k, int axis);

/// Rows (t, x1..x3, E1..E3, B1..B3, divE_minus_rho, divB, gauge_residual).
void write_field_csv(std::ostream& os, const Grid3& grid, const GridFields& g, bool header = true);

} // namespace lwvm
