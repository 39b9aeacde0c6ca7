#pragma once

#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "lwvm/fields.hpp"
#include "lwvm/representation.hpp"
#include "lwvm/transport.hpp"

namespace lwvm {

/// Sampling lattice for sup-norm estimates. The x box is the initial spatial
/// support widened by t, the xi box the momentum support widened by the force
/// reach. p points per axis include both ends, so 2p - 1 points refine it.
struct SupNormLattice {
    int x_points = 5;
    int xi_points = 5;
    double fd_step = 1e-4;
};

struct SupNorms {
    double f_sup = 0.0;
    double gradf_sup = 0.0;    // max |grad_{x,xi} f|
    double eb_sup = 0.0;       // max |E| + |B|
    double grad_eb_sup = 0.0;  // max |grad E| + |grad B| (Frobenius)
};

/// Lattice maxima, so lower bounds of the true sup-norms. The f value is also
/// sampled at the forward image of the argmax of f^in. fields may be null
/// (no field data); the field part then stays zero.
SupNorms sup_norm_estimates(const PhaseDensity& f, const FieldHistory* fields, double t, const SupNormLattice& lattice);

struct DerivativeMonitor {
    RepresentationOrders orders{6, 6, 12};
    int momentum_order = 6;
    double momentum_half_width = 0.0;  // 0: 1.1 x the initial momentum support radius
    int x_points = 4;                  // cell-centred points per axis over the spatial support box
};

struct DerivativeNorms {
    double i1 = 0.0, iv = 0.0;  // sup_j |d_j int m u dxi|
    double j1 = 0.0, jv = 0.0;  // sup_{i,j} |d_i d_j int m u dxi|
    // relative gap between the representation's d_j int u dxi and centred
    // differences of the moment potential, at the point that attains I_1
    double fd_gap = 0.0;
};

/// I_m and J_m for m = 1 and m = v (max over v1, v2, v3) from the division
/// lemma representation. At t = 0 the potentials vanish with their first
/// derivatives, and the only second derivative left is d_t^2 = int m f^in.
DerivativeNorms derivative_norms(const PhaseDensity& f, double t, double grad_f_norm, const DerivativeMonitor& opt);

struct NormEntry {
    double t = 0.0;
    double rf = 0.0;
    double f_sup = 0.0, gradf_sup = 0.0;
    double eb_sup = 0.0, grad_eb_sup = 0.0;
    double i1 = 0.0, iv = 0.0, j1 = 0.0, jv = 0.0;
    double n = 0.0;         // running max of gradf_sup
    double fitted_c = 0.0;  // log-Gronwall constant fitted on the entries so far
    double fd_gap = 0.0;
};

class NormSeries {
public:
    /// Fills n and fitted_c; rejects negative entries and times that do not increase.
    void append(NormEntry e);
    std::span<const NormEntry> entries() const { return entries_; }
    bool empty() const { return entries_.empty(); }
    std::size_t size() const { return entries_.size(); }

private:
    std::vector<NormEntry> entries_;
};

struct InequalityFit {
    std::string name;
    double c = 0.0;         // smallest constant over the whole series
    double c_early = 0.0;   // the same over the first half of the samples
    bool finite = true;
    // min over the later samples of (rhs - lhs) / rhs with c_early; negative
    // when the early constant no longer covers the series
    double margin = 0.0;
    bool pass = true;
};

struct GronwallReport {
    InequalityFit log_gronwall;          // N(t) <= N(0) + C int (1 + ln+ N) N
    std::vector<InequalityFit> others;   // field-derivative inequalities, when available
    double bound_at_horizon = 0.0;       // double-exponential bound on N(tau) implied by C
    bool diverging = false;
};

double ln_plus(double z);

/// Fits the logarithmic Gronwall constant with trapezoid integrals. Needs at
/// least two samples on a uniform time grid.
GronwallReport log_gronwall_check(std::span<const double> t, std::span<const double> n, double tau);

/// log_gronwall_check on N plus the fits of I_m <= C (1 + int (I_1 + I_v)) and
/// J_m <= C (1 + int (J_1 + J_m) + ln+ N) for m = 1, v.
GronwallReport gronwall_report(const NormSeries& s, double tau);

/// The largest N(t) allowed by N' = C (1 + ln+ N) N from N(0).
double log_gronwall_bound(double n0, double c, double t);

struct ContinuationStatus {
    std::string status;
    double rf_initial = 0.0, rf_sup = 0.0;
    double f_norm_sup = 0.0;    // sup_t (f_sup + gradf_sup)
    double eb_norm_sup = 0.0;   // sup_t (eb_sup + grad_eb_sup)
    bool support_growing = false;
    bool norms_bounded = true;
    bool all_zero = false;
    double max_fd_gap = 0.0;
    GronwallReport gronwall;
};

/// rf_tolerance: relative growth of R_f above which the support counts as growing.
ContinuationStatus continuation_report(const NormSeries& s, double tau, double rf_tolerance = 1e-3);

/// Deterministic JSON (fixed key order, 17 significant digits).
std::string continuation_json(const ContinuationStatus& c);

/// Rows (t, Rf, f_sup, gradf_sup, EB_sup, gradEB_sup, I_1, I_v, J_1, J_v, N, fitted_C).
void write_norm_csv(std::ostream& os, const NormSeries& s, bool header = true);

/// Inverse of write_norm_csv; throws with the line number on malformed rows.
NormSeries read_norm_csv(std::istream& is);

} // namespace lwvm
