#pragma once

#include "rdkin/linear_cornerstone.hpp"
#include "rdkin/markov_generator.hpp"
#include "rdkin/rdp_two_by_two.hpp"

#include <vector>

namespace rdkin {

/// sum alpha_i A_i <-> sum beta_i A_i with species grouped in diffusion blocks.
struct ReactionSpec {
    std::vector<int> alpha;
    std::vector<int> beta;
    std::vector<double> lambda;      ///< per species, > 0
    std::vector<int> block;          ///< block index of each species
    std::vector<Generator> generators;  ///< one per block, all on the same space

    /// Throws SpecificationError for catalysts, empty consumed/produced sets, bad shapes.
    void validate() const;
    std::size_t q() const { return alpha.size(); }
    double delta(std::size_t i) const;
    /// max(sum alpha, sum beta) - 1
    int theta() const;
};

/// One interacting sub-block: every consumer r with nu(r) = target, then the target.
struct SubBlock {
    int block = 0;
    std::vector<int> consumers;
    int target = 0;
    double Z = 0.0;  ///< sum of delta over consumers
    bool swapped = false;  ///< roles of alpha and beta exchanged (more produced than consumed)
};

struct NuMapping {
    /// per block: larger side in label (ascending index) order, and nu of each of its entries
    std::vector<std::vector<int>> sources;
    std::vector<std::vector<int>> images;
    std::vector<SubBlock> sub_blocks;
};

/// nu(i_l) = i_m with l - m divisible by the size of the smaller side.
NuMapping build_nu_mapping(const ReactionSpec& spec);

/// m x m coefficient matrix per (node, state); entry(a, b) is a Field.
class MatrixField {
public:
    MatrixField(TimeGrid grid, int m, std::size_t states);

    int dim() const noexcept { return m_; }
    const TimeGrid& grid() const noexcept { return entries_.front().grid(); }
    Field& entry(int a, int b) { return entries_[static_cast<std::size_t>(a * m_ + b)]; }
    const Field& entry(int a, int b) const { return entries_[static_cast<std::size_t>(a * m_ + b)]; }
    Eigen::MatrixXd at(int k, Eigen::Index x) const;

private:
    int m_;
    std::vector<Field> entries_;
};

/// du/dt = L u + A(t) u + B(t) (or A(t) u_+ with plus_variant), Strang splitting with the
/// exact frozen matrix flow at the nodes.
std::vector<Field> solve_matrix_cornerstone(const Generator& gen, const MatrixField& a,
                                            const std::vector<Field>& b,
                                            const std::vector<StateFunction>& f,
                                            int substeps = 1, bool plus_variant = false);

struct GeneralProblem {
    ReactionSpec spec;
    std::vector<StateFunction> f;

    void validate() const;
    const Generator& species_generator(std::size_t i) const {
        return spec.generators[static_cast<std::size_t>(spec.block[i])];
    }
};

/// u_i(t) = exp(t L_i) f_i.
Species general_heat_flows(const GeneralProblem& problem, const TimeGrid& grid);

/// One step of the linearized sequence: per sub-block the matrix problem with
/// consumers r: -delta_r X_r u_r + delta_r Y u_i, target i: (delta_i / Z) sum delta_r X_r u_r
/// - delta_i Y u_i, with X_r = prod u'^{c^(r)}, Y = prod u'^{p^(i)}.
Species general_decoupled_step(const GeneralProblem& problem, const NuMapping& nu,
                               const Species& u_prev, const TimeGrid& grid);

/// sup defect of sum_r u_r + (Z / delta_i) u_i = e^{tL}(sum_r f_r + (Z / delta_i) f_i).
double general_conservation_residual(const Species& u, const GeneralProblem& problem,
                                     const NuMapping& nu);

struct GeneralReport {
    std::vector<double> sigma;
    std::vector<double> sup_gaps;
    std::vector<double> ratios;
    double eta_measured = 0.0;
    double gamma = 0.0;
    double kappa = 0.0;
    double c_max = 0.0;
    double conservation_residual = 0.0;
    double positivity_min = 0.0;
    int theta = 0;
    int n_converged = 0;
};

struct GeneralSolution {
    Species u;
    GeneralReport report;
};

/// Sigma-style stopping with kappa = 1 - 2 delta_max C_max / gamma, gamma = 8 delta_max C_max,
/// C_max the largest block LSI constant.
GeneralSolution general_iterate(const GeneralProblem& problem, const TimeGrid& grid,
                                const std::vector<double>& block_c_ls,
                                const IterateOptions& options = {});

struct MembershipTable {
    int theta = 0;
    std::vector<double> gammas;
    std::vector<std::vector<double>> moments;  ///< [species][gamma] mu(e^{gamma f^{2 theta}})
    /// per species i with a nonempty product: gauge_Phi2(prod f^{alpha^(i)}) and the
    /// Holder/Young bound prod gauge_{Phi_{2m}}(f_j)^{alpha_j^(i)}
    std::vector<double> product_norm;
    std::vector<double> product_bound;

    bool products_ok(double rel = 1e-8) const;
};

MembershipTable theta_and_membership(const ReactionSpec& spec, const std::vector<StateFunction>& f);

/// The two-by-two problem as a general spec: alpha (1,1,0,0), beta (0,0,1,1),
/// blocks {u1, u3} with C1 L and {u2, u4} with C2 L.
GeneralProblem embed_two_by_two(const TwoByTwoProblem& problem);

}  // namespace rdkin
