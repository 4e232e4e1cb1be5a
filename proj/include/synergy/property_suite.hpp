#pragma once

// Seeded randomized checks over the projection, the robust gap and reset,
// the obstacle geometry and the synergistic algebra. Every suite is
// deterministic given its seed.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace synergy::props {

/// Faults that can be injected to confirm the suites detect them.
enum class Mutation { none, proj_sign_flip, zero_delta };

std::string to_string(Mutation m);
Mutation parse_mutation(const std::string& s);

struct SuiteResult {
  std::string name;
  std::size_t cases = 0;
  std::size_t failures = 0;
  double worst = 0.0;      // largest observed error (suite-specific units)
  double tolerance = 0.0;
  std::string detail;

  bool passed() const { return failures == 0; }
};

struct PropertyReport {
  std::uint64_t seed = 0;
  Mutation mutation = Mutation::none;
  std::vector<SuiteResult> suites;

  bool passed() const;
  const SuiteResult* find(const std::string& name) const;
};

std::ostream& operator<<(std::ostream& os, const SuiteResult& r);

// Individual suites. `n` is the number of random cases.
SuiteResult proj_lipschitz(std::uint64_t seed, std::size_t n = 10000, Mutation m = Mutation::none);
SuiteResult proj_inequality(std::uint64_t seed, std::size_t n = 10000, Mutation m = Mutation::none);
SuiteResult robust_gap_oracle(std::uint64_t seed, std::size_t n = 1000);
SuiteResult g_hat_oracle(std::uint64_t seed, std::size_t n = 1000);
SuiteResult chart_round_trip(std::uint64_t seed, std::size_t n = 1000);
SuiteResult analytic_jacobians(std::uint64_t seed, std::size_t n = 1000);
SuiteResult nominal_flow_decrease(std::uint64_t seed, std::size_t n = 1000);
SuiteResult gap_ordering(std::uint64_t seed, std::size_t n = 1000);
SuiteResult reset_decrease(std::uint64_t seed, std::size_t n = 1000);
SuiteResult backstep_gap_identity(std::uint64_t seed, std::size_t n = 1000);
SuiteResult candidate_enumeration(std::uint64_t seed, std::size_t n = 1000);
SuiteResult delta_validation(Mutation m = Mutation::none);

PropertyReport property_suite(std::uint64_t seed, Mutation m = Mutation::none);

}  // namespace synergy::props
