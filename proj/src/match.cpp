#include <algorithm>
#include <bit>

#include "loophole/kernel.hpp"

namespace loophole::kernel {

namespace {

using LKind = rulelang::Literal::Kind;

class Matcher {
 public:
  Matcher(const FactBase& db, const CompiledCondition& c, Binding seed, bool first_only)
      : db_(db), c_(c), b_(std::move(seed)), first_only_(first_only) {
    if (b_.size() != c_.var_names.size()) b_.resize(c_.var_names.size(), kUnbound);
    remaining_ = c_.literals.size() >= 64 ? ~0ULL : ((1ULL << c_.literals.size()) - 1);
  }

  std::vector<Binding> run() {
    step();
    return std::move(out_);
  }

 private:
  bool bound(const Term& t) const {
    switch (t.kind) {
      case Term::Kind::constant: return true;
      case Term::Kind::variable: return b_[t.value] != kUnbound;
      case Term::Kind::anonymous: return false;
    }
    return false;
  }

  EntityId value(const Term& t) const { return t.kind == Term::Kind::constant ? t.value : b_[t.value]; }

  bool named_vars_bound(const CompiledLiteral& l) const {
    for (std::size_t i = 0; i < l.arity; ++i) {
      const Term& t = l.args[i];
      if (t.kind == Term::Kind::variable && b_[t.value] == kUnbound) return false;
    }
    return true;
  }

  bool fully_bound(const CompiledLiteral& l) const {
    for (std::size_t i = 0; i < l.arity; ++i) {
      if (!bound(l.args[i])) return false;
    }
    return true;
  }

  // True if some fact of the predicate agrees with every bound position.
  bool any_fact(const CompiledLiteral& l) const {
    for (const Fact& f : db_.with_predicate(l.predicate)) {
      bool ok = true;
      for (std::size_t i = 0; i < l.arity && ok; ++i) {
        if (bound(l.args[i])) ok = f.args[i] == value(l.args[i]);
      }
      if (ok) return true;
    }
    return false;
  }

  bool test_filter(const CompiledLiteral& l) const {
    switch (l.kind) {
      case LKind::positive: return any_fact(l);
      case LKind::negative: return !any_fact(l);
      case LKind::equal: return value(l.lhs) == value(l.rhs);
      case LKind::not_equal: return value(l.lhs) != value(l.rhs);
    }
    return false;
  }

  void step() {
    if (done_) return;
    if (remaining_ == 0) {
      out_.push_back(b_);
      if (first_only_) done_ = true;
      return;
    }

    int filter = -1;
    int binder = -1;
    int generator = -1;
    for (std::uint64_t m = remaining_; m; m &= m - 1) {
      const int i = std::countr_zero(m);
      const auto& l = c_.literals[static_cast<std::size_t>(i)];
      switch (l.kind) {
        case LKind::positive:
          if (fully_bound(l) && filter < 0) filter = i;
          else if (generator < 0) generator = i;
          break;
        case LKind::negative:
          if (named_vars_bound(l) && filter < 0) filter = i;
          break;
        case LKind::equal:
          if (bound(l.lhs) && bound(l.rhs)) {
            if (filter < 0) filter = i;
          } else if ((bound(l.lhs) || bound(l.rhs)) && binder < 0) {
            binder = i;
          }
          break;
        case LKind::not_equal:
          if (bound(l.lhs) && bound(l.rhs) && filter < 0) filter = i;
          break;
      }
      if (filter >= 0) break;
    }

    if (filter >= 0) {
      const auto& l = c_.literals[static_cast<std::size_t>(filter)];
      if (!test_filter(l)) return;
      remaining_ &= ~(1ULL << filter);
      step();
      remaining_ |= 1ULL << filter;
      return;
    }

    if (binder >= 0) {
      const auto& l = c_.literals[static_cast<std::size_t>(binder)];
      const Term& free = bound(l.lhs) ? l.rhs : l.lhs;
      const Term& fixed = bound(l.lhs) ? l.lhs : l.rhs;
      b_[free.value] = value(fixed);
      remaining_ &= ~(1ULL << binder);
      step();
      remaining_ |= 1ULL << binder;
      b_[free.value] = kUnbound;
      return;
    }

    if (generator >= 0) {
      const auto& l = c_.literals[static_cast<std::size_t>(generator)];
      remaining_ &= ~(1ULL << generator);
      for (const Fact& f : db_.with_predicate(l.predicate)) {
        std::array<EntityId, 3> newly{kUnbound, kUnbound, kUnbound};
        bool ok = true;
        for (std::size_t i = 0; i < l.arity && ok; ++i) {
          const Term& t = l.args[i];
          if (t.kind == Term::Kind::anonymous) continue;
          if (bound(t)) {
            ok = value(t) == f.args[i];
          } else {
            b_[t.value] = f.args[i];
            newly[i] = t.value;
          }
        }
        if (ok) step();
        for (EntityId v : newly) {
          if (v != kUnbound) b_[v] = kUnbound;
        }
        if (done_) break;
      }
      remaining_ |= 1ULL << generator;
      return;
    }

    // Only negations/comparisons over variables nothing can bind.
    for (std::uint64_t m = remaining_; m; m &= m - 1) {
      const auto& l = c_.literals[static_cast<std::size_t>(std::countr_zero(m))];
      const auto check = [&](const Term& t) {
        if (t.kind == Term::Kind::variable && b_[t.value] == kUnbound)
          throw MatchError("unbound variable '" + c_.var_names[t.value] + "' in negated literal or comparison");
      };
      if (l.kind == LKind::negative) {
        for (std::size_t i = 0; i < l.arity; ++i) check(l.args[i]);
      } else {
        check(l.lhs);
        check(l.rhs);
      }
    }
    throw MatchError("condition cannot be evaluated");
  }

  const FactBase& db_;
  const CompiledCondition& c_;
  Binding b_;
  std::uint64_t remaining_ = 0;
  bool first_only_ = false;
  bool done_ = false;
  std::vector<Binding> out_;
};

}  // namespace

std::vector<Binding> match(const FactBase& db, const CompiledCondition& c, const Binding& seed) {
  auto out = Matcher(db, c, seed, false).run();
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<Binding> match(const FactBase& db, const CompiledCondition& c) {
  return match(db, c, Binding(c.var_names.size(), kUnbound));
}

std::optional<Binding> match_any(const FactBase& db, const CompiledCondition& c, const Binding& seed) {
  auto out = Matcher(db, c, seed, true).run();
  if (out.empty()) return std::nullopt;
  return std::move(out.front());
}

}  // namespace loophole::kernel
