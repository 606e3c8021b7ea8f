#pragma once

#include <map>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "lmte/dual.hpp"
#include "lmte/observation.hpp"
#include "lmte/transitions.hpp"

namespace lmte {

/// K(s), its gradient and (row-major) Hessian over the retained rows.
template <class S>
struct CgfValue {
  S value{};
  std::vector<S> grad;
  std::vector<S> hess;  // empty unless order >= 2
};

/// Evaluation-order flags for `evaluate`.
inline constexpr int kValueOnly = 0;
inline constexpr int kWithGradient = 1;
inline constexpr int kWithHessian = 2;

/// Raised when the CGF cannot be evaluated (zero mass, overflow).
class EvaluationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Explicit backend: histories are grouped by their restricted column of A
/// ("signature") and K(s) = N log sum_c P_c exp(a_c's) is evaluated with a
/// log-sum-exp guard.
class ExplicitCgf {
 public:
  /// Signatures only; masses must come from `mass_from_pi`.
  ExplicitCgf(const LinkMatrix& A, std::vector<int> retained);
  /// Also keeps the latent histories so masses can be built from transitions.
  ExplicitCgf(const StudyDesign& design, const ObservedLayout& layout, std::vector<int> retained);

  std::size_t dimension() const { return retained_.size(); }
  std::size_t signatures() const { return sigs_.size(); }
  std::size_t histories() const { return sig_of_.size(); }
  /// Retained positions touched by signature c (signature 0 is the empty one).
  const std::vector<int>& signature_rows(std::size_t c) const { return sigs_.at(c).rows; }

  std::vector<double> mass_from_pi(std::span<const double> pi) const;

  template <class S>
  std::vector<S> signature_mass(const LatentTransitions<S>& tr) const;

  template <class S>
  CgfValue<S> evaluate(std::span<const S> mass, const S& N, std::span<const S> s, int order) const;

 private:
  struct Signature {
    std::vector<int> rows;    // positions in the retained basis
    std::vector<int> counts;  // multiplicities
  };
  void add_column(std::span<const LinkMatrix::Entry> col, std::map<std::vector<std::pair<int, int>>, int>& index);

  std::vector<int> retained_;
  std::vector<int> position_;  // layout row -> retained position or -1
  std::vector<Signature> sigs_;
  std::vector<std::uint32_t> sig_of_;
  std::vector<std::uint8_t> states_;  // histories x T, only with the design constructor
  int occasions_ = 0;
};

/// Transfer-matrix backend for batch-mark layouts: a forward-backward pass
/// over augmented states (latent state x marking period, with first capture
/// and recapture split) accumulates exp(s_r) on every occasion that emits
/// count r. Cost is linear in the number of occasions rather than in J.
class TransferCgf {
 public:
  TransferCgf(const ObservedLayout& layout, std::vector<int> retained);

  std::size_t dimension() const { return retained_.size(); }
  int augmented_states() const { return states_; }

  template <class S>
  CgfValue<S> evaluate(const LatentTransitions<S>& tr, const S& N, std::span<const S> s, int order) const;

 private:
  struct Move {
    int from;
    int to;
    std::uint8_t a;  // latent state at occasion o-1
    std::uint8_t b;  // latent state at occasion o
  };
  struct Emission {
    int state;
    int position;  // retained position
  };

  int states_ = 0;
  int occasions_ = 0;
  std::vector<int> retained_;
  std::vector<std::pair<int, std::uint8_t>> init_;  // (augmented state, latent state) on occasion 0
  std::vector<std::vector<Move>> moves_;            // moves_[o] for o >= 1
  std::vector<std::vector<int>> event_;             // event_[o][state] -> retained position or -1
  std::vector<std::vector<Emission>> emissions_;    // states with a retained event at o
};

/// Explicit CGF evaluation for an arbitrary probability vector.
struct CgfContext {
  double N = 0.0;
  std::vector<double> pi;
  const LinkMatrix* A = nullptr;
  std::vector<int> retained;
};

CgfValue<double> cgf(std::span<const double> s, const CgfContext& ctx, int order = kWithHessian);

/// Dense helpers.
Eigen::VectorXd to_eigen(const std::vector<double>& v);
Eigen::MatrixXd hessian_matrix(const CgfValue<double>& c);

}  // namespace lmte
