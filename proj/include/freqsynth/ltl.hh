/*
 * ltl.hh
 *
 * finite-trace LTL over sampled trajectories: atoms are predicates on
 * trace positions, NEXT is strong (fails at the last position), UNTIL
 * requires a witness inside the trace, and the bounded EVENTUALLY takes
 * its witness within a fixed number of steps
 */

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>

namespace freqsynth::ltl {

using Prop = std::function<bool(std::size_t)>;

enum class Op {
  tt,
  ff,
  atom,
  neg,
  conj,
  disj,
  implies,
  next,
  until,
  eventually,
  always,
  eventually_within
};

struct Formula;
using FormulaPtr = std::shared_ptr<const Formula>;

struct Formula {
  Op op;
  std::string label;     /* atoms only, for diagnostics */
  Prop prop;             /* atoms only */
  FormulaPtr lhs, rhs;   /* children */
  std::size_t steps = 0; /* eventually_within bound, in samples */
};

inline FormulaPtr tt() { return std::make_shared<Formula>(Formula{Op::tt}); }
inline FormulaPtr ff() { return std::make_shared<Formula>(Formula{Op::ff}); }

inline FormulaPtr atom(std::string label, Prop p) {
  if (!p)
    throw std::invalid_argument("ltl::atom: empty predicate");
  Formula f{Op::atom};
  f.label = std::move(label);
  f.prop = std::move(p);
  return std::make_shared<Formula>(std::move(f));
}

inline FormulaPtr neg(FormulaPtr a) {
  Formula f{Op::neg};
  f.lhs = std::move(a);
  return std::make_shared<Formula>(std::move(f));
}

inline FormulaPtr conj(FormulaPtr a, FormulaPtr b) {
  Formula f{Op::conj};
  f.lhs = std::move(a);
  f.rhs = std::move(b);
  return std::make_shared<Formula>(std::move(f));
}

inline FormulaPtr disj(FormulaPtr a, FormulaPtr b) {
  Formula f{Op::disj};
  f.lhs = std::move(a);
  f.rhs = std::move(b);
  return std::make_shared<Formula>(std::move(f));
}

inline FormulaPtr implies(FormulaPtr a, FormulaPtr b) {
  Formula f{Op::implies};
  f.lhs = std::move(a);
  f.rhs = std::move(b);
  return std::make_shared<Formula>(std::move(f));
}

inline FormulaPtr next(FormulaPtr a) {
  Formula f{Op::next};
  f.lhs = std::move(a);
  return std::make_shared<Formula>(std::move(f));
}

inline FormulaPtr until(FormulaPtr a, FormulaPtr b) {
  Formula f{Op::until};
  f.lhs = std::move(a);
  f.rhs = std::move(b);
  return std::make_shared<Formula>(std::move(f));
}

inline FormulaPtr eventually(FormulaPtr a) {
  Formula f{Op::eventually};
  f.lhs = std::move(a);
  return std::make_shared<Formula>(std::move(f));
}

inline FormulaPtr always(FormulaPtr a) {
  Formula f{Op::always};
  f.lhs = std::move(a);
  return std::make_shared<Formula>(std::move(f));
}

inline FormulaPtr eventually_within(FormulaPtr a, std::size_t steps) {
  Formula f{Op::eventually_within};
  f.lhs = std::move(a);
  f.steps = steps;
  return std::make_shared<Formula>(std::move(f));
}

/* evaluate f at position pos of a trace with len samples (pos < len) */
inline bool eval(const FormulaPtr& f, std::size_t pos, std::size_t len) {
  if (!f)
    throw std::invalid_argument("ltl::eval: null formula");
  if (pos >= len)
    throw std::out_of_range("ltl::eval: position past end of trace");
  switch (f->op) {
    case Op::tt:
      return true;
    case Op::ff:
      return false;
    case Op::atom:
      return f->prop(pos);
    case Op::neg:
      return !eval(f->lhs, pos, len);
    case Op::conj:
      return eval(f->lhs, pos, len) && eval(f->rhs, pos, len);
    case Op::disj:
      return eval(f->lhs, pos, len) || eval(f->rhs, pos, len);
    case Op::implies:
      return !eval(f->lhs, pos, len) || eval(f->rhs, pos, len);
    case Op::next:
      return pos + 1 < len && eval(f->lhs, pos + 1, len);
    case Op::until:
      for (std::size_t k = pos; k < len; k++) {
        if (eval(f->rhs, k, len))
          return true;
        if (!eval(f->lhs, k, len))
          return false;
      }
      return false;
    case Op::eventually:
      for (std::size_t k = pos; k < len; k++)
        if (eval(f->lhs, k, len))
          return true;
      return false;
    case Op::always:
      for (std::size_t k = pos; k < len; k++)
        if (!eval(f->lhs, k, len))
          return false;
      return true;
    case Op::eventually_within: {
      std::size_t last = pos + f->steps;
      for (std::size_t k = pos; k < len && k <= last; k++)
        if (eval(f->lhs, k, len))
          return true;
      return false;
    }
  }
  throw std::logic_error("ltl::eval: unknown operator");
}

/* whole-trace satisfaction, anchored at the first sample */
inline bool holds(const FormulaPtr& f, std::size_t len) {
  if (len == 0)
    throw std::invalid_argument("ltl::holds: empty trace");
  return eval(f, 0, len);
}

}  // namespace freqsynth::ltl
