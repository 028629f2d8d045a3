/* random finite-trace formulas over random bit traces, plus pairs of
 * syntactically different but semantically equal rewrites */

#pragma once

#include <freqsynth/ltl.hh>

#include <cstdint>
#include <memory>
#include <random>
#include <utility>
#include <vector>

namespace testsupport {

namespace ltl = freqsynth::ltl;

struct BitTrace {
  std::size_t len = 0;
  std::shared_ptr<std::vector<std::vector<std::uint8_t>>> bits; /* atom -> per-position value */
};

inline BitTrace random_bit_trace(std::mt19937_64& rng, std::size_t n_atoms, std::size_t len) {
  BitTrace tr;
  tr.len = len;
  tr.bits = std::make_shared<std::vector<std::vector<std::uint8_t>>>(n_atoms);
  std::bernoulli_distribution coin(0.5);
  for (auto& row : *tr.bits) {
    row.resize(len);
    for (auto& b : row)
      b = coin(rng) ? 1 : 0;
  }
  return tr;
}

inline ltl::FormulaPtr random_formula(std::mt19937_64& rng, const BitTrace& tr, int depth) {
  std::uniform_int_distribution<int> leaf(0, 9);
  std::uniform_int_distribution<int> node(0, 8);
  if (depth <= 0 || leaf(rng) == 0) {
    int pick = leaf(rng);
    if (pick == 0)
      return ltl::tt();
    if (pick == 1)
      return ltl::ff();
    std::uniform_int_distribution<std::size_t> ai(0, tr.bits->size() - 1);
    std::size_t a = ai(rng);
    auto bits = tr.bits;
    return ltl::atom("p" + std::to_string(a),
                     [bits, a](std::size_t p) { return (*bits)[a][p] != 0; });
  }
  switch (node(rng)) {
    case 0:
      return ltl::neg(random_formula(rng, tr, depth - 1));
    case 1:
      return ltl::conj(random_formula(rng, tr, depth - 1), random_formula(rng, tr, depth - 1));
    case 2:
      return ltl::disj(random_formula(rng, tr, depth - 1), random_formula(rng, tr, depth - 1));
    case 3:
      return ltl::implies(random_formula(rng, tr, depth - 1), random_formula(rng, tr, depth - 1));
    case 4:
      return ltl::next(random_formula(rng, tr, depth - 1));
    case 5:
      return ltl::until(random_formula(rng, tr, depth - 1), random_formula(rng, tr, depth - 1));
    case 6:
      return ltl::eventually(random_formula(rng, tr, depth - 1));
    case 7:
      return ltl::always(random_formula(rng, tr, depth - 1));
    default: {
      std::uniform_int_distribution<std::size_t> steps(0, tr.len);
      return ltl::eventually_within(random_formula(rng, tr, depth - 1), steps(rng));
    }
  }
}

constexpr int n_identities = 12;

/* two formulas that must evaluate identically at every trace position */
inline std::pair<ltl::FormulaPtr, ltl::FormulaPtr> identity_pair(std::mt19937_64& rng,
                                                                 const BitTrace& tr, int which) {
  auto f = random_formula(rng, tr, 3);
  auto g = random_formula(rng, tr, 3);
  switch (which) {
    case 0:
      return {ltl::eventually(f), ltl::until(ltl::tt(), f)};
    case 1:
      return {ltl::always(f), ltl::neg(ltl::eventually(ltl::neg(f)))};
    case 2:
      return {ltl::implies(f, g), ltl::disj(ltl::neg(f), g)};
    case 3:
      return {ltl::next(ltl::conj(f, g)), ltl::conj(ltl::next(f), ltl::next(g))};
    case 4:
      return {ltl::eventually(ltl::eventually(f)), ltl::eventually(f)};
    case 5:
      return {ltl::always(ltl::always(f)), ltl::always(f)};
    case 6:
      return {ltl::neg(ltl::conj(f, g)), ltl::disj(ltl::neg(f), ltl::neg(g))};
    case 7:
      return {ltl::neg(ltl::disj(f, g)), ltl::conj(ltl::neg(f), ltl::neg(g))};
    case 8: /* one-step expansion; the strong NEXT closes the last position */
      return {ltl::until(f, g), ltl::disj(g, ltl::conj(f, ltl::next(ltl::until(f, g))))};
    case 9:
      return {ltl::eventually(f), ltl::disj(f, ltl::next(ltl::eventually(f)))};
    case 10:
      return {ltl::always(f),
              ltl::conj(f, ltl::disj(ltl::next(ltl::always(f)), ltl::neg(ltl::next(ltl::tt()))))};
    default: /* a window covering the whole trace is an unbounded search */
      return {ltl::eventually_within(f, tr.len), ltl::eventually(f)};
  }
}

}  // namespace testsupport
