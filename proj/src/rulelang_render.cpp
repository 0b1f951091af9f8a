#include <charconv>
#include <cmath>

#include "loophole/rulelang.hpp"

namespace loophole::rulelang {

std::string format_number(double v) {
  if (v == 0.0) return "0";  // also folds -0
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, ptr);
}

std::string render_term(const Term& t) { return t.kind == Term::Kind::anonymous ? "_" : t.name; }

std::string render_atom(const Atom& a) {
  std::string out = a.predicate + "(";
  for (std::size_t i = 0; i < a.args.size(); ++i) {
    if (i) out += ", ";
    out += render_term(a.args[i]);
  }
  return out + ")";
}

std::string render_literal(const Literal& l) {
  switch (l.kind) {
    case Literal::Kind::positive: return render_atom(l.atom);
    case Literal::Kind::negative: return "not " + render_atom(l.atom);
    case Literal::Kind::equal: return render_term(l.lhs) + " = " + render_term(l.rhs);
    case Literal::Kind::not_equal: return render_term(l.lhs) + " != " + render_term(l.rhs);
  }
  return {};
}

std::string render_condition(const Condition& c) {
  std::string out;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (i) out += ", ";
    out += render_literal(c[i]);
  }
  return out;
}

std::string render_expr(const LinearExpr& e) {
  std::string out;
  auto append = [&](double coeff, std::string_view var) {
    const bool negative = std::signbit(coeff);
    const double mag = std::fabs(coeff);
    if (out.empty()) {
      if (negative) out += "-";
    } else {
      out += negative ? " - " : " + ";
    }
    if (var.empty()) {
      out += format_number(mag);
    } else if (mag == 1.0) {
      out += var;
    } else {
      out += format_number(mag) + " * " + std::string(var);
    }
  };
  for (const auto& [v, c] : e.terms) append(c, expr_var_name(v));
  if (e.constant != 0.0 || out.empty()) append(e.constant, {});
  return out;
}

std::string render_ground(const GroundAtom& a) {
  std::string out = a.predicate + "(";
  for (std::size_t i = 0; i < a.args.size(); ++i) {
    if (i) out += ",";
    out += a.args[i];
  }
  return out + ")";
}

std::optional<GroundAtom> parse_ground(std::string_view text) {
  const auto open = text.find('(');
  if (open == std::string_view::npos || text.empty() || text.back() != ')') return std::nullopt;
  GroundAtom g;
  g.predicate = std::string(text.substr(0, open));
  std::string_view inner = text.substr(open + 1, text.size() - open - 2);
  while (!inner.empty()) {
    const auto comma = inner.find(',');
    auto piece = inner.substr(0, comma);
    while (!piece.empty() && piece.front() == ' ') piece.remove_prefix(1);
    while (!piece.empty() && piece.back() == ' ') piece.remove_suffix(1);
    if (piece.empty()) return std::nullopt;
    g.args.emplace_back(piece);
    if (comma == std::string_view::npos) break;
    inner.remove_prefix(comma + 1);
  }
  if (g.predicate.empty()) return std::nullopt;
  return g;
}

std::string render(const RuleSetDoc& doc) {
  std::string out;
  for (const auto& r : doc.regions) {
    out += "region " + r.name + ": ";
    for (std::size_t i = 0; i < r.members.size(); ++i) {
      if (i) out += ", ";
      out += r.members[i];
    }
    out += ".\n";
  }
  if (!doc.regions.empty()) out += "\n";
  for (const auto& [country, rate] : doc.rate_table) out += "rate " + country + " " + format_number(rate) + ".\n";
  if (!doc.rate_table.empty()) out += "\n";

  for (const auto& r : doc.action_rules) {
    out += "action " + r.name + "(";
    for (std::size_t i = 0; i < r.params.size(); ++i) {
      if (i) out += ", ";
      out += r.params[i];
    }
    out += ") ref \"" + r.legal_ref + "\" {\n";
    out += "  pre: " + render_condition(r.pre) + ";\n";
    out += "  eff: " + render_condition(r.effects) + ";\n";
    out += "}\n\n";
  }
  for (const auto& r : doc.reduction_rules) {
    out += "reduction \"" + r.legal_ref + "\" kind " + std::string(reduction_kind_name(r.kind)) + " {\n";
    out += "  when: " + render_condition(r.when) + ";\n";
    out += "  new_base: " + render_expr(r.new_base) + ";\n";
    out += "  new_rate: " + render_expr(r.new_rate) + ";\n";
    out += "}\n\n";
  }
  while (out.size() >= 2 && out[out.size() - 1] == '\n' && out[out.size() - 2] == '\n') out.pop_back();
  return out;
}

std::string render(const StateSpec& spec) {
  std::string out = "# declarations\n";
  for (const auto& c : spec.declared_companies) out += "company " + c + ".\n";
  for (const auto& i : spec.declared_ips) out += "ip " + i + ".\n";
  if (!spec.facts.empty()) {
    out += "\n# facts\n";
    for (const auto& f : spec.facts) {
      out += "fact " + f.predicate + "(";
      for (std::size_t i = 0; i < f.args.size(); ++i) {
        if (i) out += ", ";
        out += f.args[i];
      }
      out += ").\n";
    }
  }
  if (spec.scenario) {
    const auto& sc = *spec.scenario;
    out += "\n# scenario\n";
    for (const auto& [c, rev] : sc.countries) out += "country " + c + " revenue " + format_number(rev) + ".\n";
    for (const auto& h : sc.havens) out += "haven " + h + ".\n";
    if (!sc.pool.empty()) {
      out += "pool ";
      for (std::size_t i = 0; i < sc.pool.size(); ++i) {
        if (i) out += ", ";
        out += sc.pool[i];
      }
      out += ".\n";
    }
    if (sc.royalty_rate) out += "royalty_rate " + format_number(*sc.royalty_rate) + ".\n";
    if (sc.transfer_price) out += "transfer_price " + format_number(*sc.transfer_price) + ".\n";
    if (sc.cost) out += "cost " + format_number(*sc.cost) + ".\n";
  }
  return out;
}

}  // namespace loophole::rulelang
