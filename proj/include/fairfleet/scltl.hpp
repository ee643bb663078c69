#pragma once

// Co-safe LTL front end: formula syntax tree, parser, and translation to a
// minimal total DFA over the formula's own atoms.
//
// Concrete syntax (whitespace insignificant):
//   until  := or ( 'U' until )?            right associative, lowest
//   or     := and ( '|' and )*
//   and    := unary ( '&' unary )*
//   unary  := '!' atom | 'X' unary | 'F' unary | '(' until ')' | atom
//   atom   := [A-Za-z_][A-Za-z0-9_]*  |  '"' [A-Za-z0-9_]+ '"'
// `X` and `F` act as operators only when followed by something that can
// start a formula; otherwise they are read as atoms (so `F F` is
// "eventually F"). `U` in operand position is an atom. Quoting always
// yields an atom.

#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <queue>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "fairfleet/errors.hpp"

namespace fairfleet {

enum class FormulaKind { Atom, NegAtom, And, Or, Next, Until, Eventually };

class Formula {
 public:
  static Formula atom(std::string name) { return Formula(FormulaKind::Atom, std::move(name), {}); }
  static Formula negated(std::string name) { return Formula(FormulaKind::NegAtom, std::move(name), {}); }
  static Formula conj(Formula a, Formula b) { return Formula(FormulaKind::And, {}, {std::move(a), std::move(b)}); }
  static Formula disj(Formula a, Formula b) { return Formula(FormulaKind::Or, {}, {std::move(a), std::move(b)}); }
  static Formula next(Formula a) { return Formula(FormulaKind::Next, {}, {std::move(a)}); }
  static Formula until(Formula a, Formula b) { return Formula(FormulaKind::Until, {}, {std::move(a), std::move(b)}); }
  static Formula eventually(Formula a) { return Formula(FormulaKind::Eventually, {}, {std::move(a)}); }

  FormulaKind kind() const noexcept { return node_->kind; }
  /// Proposition name; only meaningful for Atom and NegAtom.
  const std::string& name() const noexcept { return node_->name; }
  std::span<const Formula> children() const noexcept { return node_->kids; }
  const Formula& child(std::size_t i) const { return node_->kids.at(i); }

  std::string to_string() const {
    std::string out;
    print(out, 0);
    return out;
  }

  /// Sorted, de-duplicated atom names.
  std::vector<std::string> atoms() const {
    std::set<std::string> acc;
    collect(acc);
    return {acc.begin(), acc.end()};
  }

  friend bool operator==(const Formula& a, const Formula& b) {
    if (a.node_ == b.node_) return true;
    if (a.kind() != b.kind() || a.name() != b.name() || a.node_->kids.size() != b.node_->kids.size()) return false;
    for (std::size_t i = 0; i < a.node_->kids.size(); ++i)
      if (!(a.node_->kids[i] == b.node_->kids[i])) return false;
    return true;
  }

 private:
  struct Node {
    FormulaKind kind;
    std::string name;
    std::vector<Formula> kids;
  };

  Formula(FormulaKind k, std::string name, std::vector<Formula> kids)
      : node_(std::make_shared<const Node>(Node{k, std::move(name), std::move(kids)})) {}

  static int precedence(FormulaKind k) {
    switch (k) {
      case FormulaKind::Until: return 1;
      case FormulaKind::Or: return 2;
      case FormulaKind::And: return 3;
      default: return 4;
    }
  }

  static void print_atom(std::string& out, const std::string& name) {
    if (name == "X" || name == "F" || name == "U")
      out += '"' + name + '"';
    else
      out += name;
  }

  void print(std::string& out, int parent) const {
    const int p = precedence(kind());
    const bool paren = p < parent;
    if (paren) out += '(';
    switch (kind()) {
      case FormulaKind::Atom: print_atom(out, name()); break;
      case FormulaKind::NegAtom: out += '!'; print_atom(out, name()); break;
      case FormulaKind::And:
        child(0).print(out, 3);
        out += " & ";
        child(1).print(out, 4);
        break;
      case FormulaKind::Or:
        child(0).print(out, 2);
        out += " | ";
        child(1).print(out, 3);
        break;
      case FormulaKind::Until:
        child(0).print(out, 2);
        out += " U ";
        child(1).print(out, 1);
        break;
      case FormulaKind::Next: out += "X "; child(0).print(out, 4); break;
      case FormulaKind::Eventually: out += "F "; child(0).print(out, 4); break;
    }
    if (paren) out += ')';
  }

  void collect(std::set<std::string>& acc) const {
    if (kind() == FormulaKind::Atom || kind() == FormulaKind::NegAtom) acc.insert(name());
    for (const auto& k : node_->kids) k.collect(acc);
  }

  std::shared_ptr<const Node> node_;
};

// ---------------------------------------------------------------------------
// Parser

namespace detail {

struct FormulaToken {
  enum Kind { Ident, Quoted, Not, And, Or, LParen, RParen, End } kind;
  std::string text;
  std::size_t pos;
};

inline bool atom_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
inline bool atom_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

inline std::vector<FormulaToken> tokenize_formula(std::string_view text) {
  std::vector<FormulaToken> toks;
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    const std::size_t start = i;
    switch (c) {
      case '!': toks.push_back({FormulaToken::Not, "!", start}); ++i; continue;
      case '&': toks.push_back({FormulaToken::And, "&", start}); ++i; continue;
      case '|': toks.push_back({FormulaToken::Or, "|", start}); ++i; continue;
      case '(': toks.push_back({FormulaToken::LParen, "(", start}); ++i; continue;
      case ')': toks.push_back({FormulaToken::RParen, ")", start}); ++i; continue;
      default: break;
    }
    if (c == '"') {
      ++i;
      while (i < text.size() && atom_char(text[i])) ++i;
      if (i >= text.size() || text[i] != '"' || i == start + 1)
        throw SyntaxError("malformed quoted proposition", start);
      toks.push_back({FormulaToken::Quoted, std::string(text.substr(start + 1, i - start - 1)), start});
      ++i;
      continue;
    }
    if (atom_start(c)) {
      while (i < text.size() && atom_char(text[i])) ++i;
      toks.push_back({FormulaToken::Ident, std::string(text.substr(start, i - start)), start});
      continue;
    }
    throw SyntaxError(std::string("unexpected character '") + c + "'", start);
  }
  toks.push_back({FormulaToken::End, "", text.size()});
  return toks;
}

class FormulaParser {
 public:
  explicit FormulaParser(std::string_view text) : toks_(tokenize_formula(text)) {}

  Formula parse() {
    Formula f = parse_until();
    if (peek().kind != FormulaToken::End)
      throw SyntaxError("unexpected token '" + peek().text + "'", peek().pos);
    return f;
  }

 private:
  const FormulaToken& peek(std::size_t ahead = 0) const {
    return toks_[std::min(pos_ + ahead, toks_.size() - 1)];
  }
  const FormulaToken& take() { return toks_[std::min(pos_++, toks_.size() - 1)]; }

  static bool is_keyword(const FormulaToken& t, const char* kw) {
    return t.kind == FormulaToken::Ident && t.text == kw;
  }
  static bool starts_formula(const FormulaToken& t) {
    return t.kind == FormulaToken::Ident || t.kind == FormulaToken::Quoted || t.kind == FormulaToken::Not ||
           t.kind == FormulaToken::LParen;
  }

  Formula parse_until() {
    Formula lhs = parse_or();
    if (is_keyword(peek(), "U")) {
      take();
      return Formula::until(std::move(lhs), parse_until());
    }
    return lhs;
  }

  Formula parse_or() {
    Formula lhs = parse_and();
    while (peek().kind == FormulaToken::Or) {
      take();
      lhs = Formula::disj(std::move(lhs), parse_and());
    }
    return lhs;
  }

  Formula parse_and() {
    Formula lhs = parse_unary();
    while (peek().kind == FormulaToken::And) {
      take();
      lhs = Formula::conj(std::move(lhs), parse_unary());
    }
    return lhs;
  }

  Formula parse_unary() {
    const FormulaToken& t = peek();
    switch (t.kind) {
      case FormulaToken::Not: {
        const std::size_t at = t.pos;
        take();
        Formula operand = parse_unary();
        if (operand.kind() != FormulaKind::Atom) throw NegationError(at);
        return Formula::negated(operand.name());
      }
      case FormulaToken::LParen: {
        take();
        Formula inner = parse_until();
        if (peek().kind != FormulaToken::RParen) throw SyntaxError("expected ')'", peek().pos);
        take();
        return inner;
      }
      case FormulaToken::Quoted: return Formula::atom(take().text);
      case FormulaToken::Ident: {
        if ((t.text == "X" || t.text == "F") && starts_formula(peek(1))) {
          const bool next = take().text == "X";
          Formula operand = parse_unary();
          return next ? Formula::next(std::move(operand)) : Formula::eventually(std::move(operand));
        }
        return Formula::atom(take().text);
      }
      default: throw SyntaxError("expected a formula", t.pos);
    }
  }

  std::vector<FormulaToken> toks_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline Formula parse_formula(std::string_view text) { return detail::FormulaParser(text).parse(); }

// ---------------------------------------------------------------------------
// DFA

/// Total deterministic automaton over 2^atoms. Symbols are bitmasks: bit i
/// is set iff atoms()[i] holds. Propositions outside atoms() are ignored.
class Dfa {
 public:
  using State = std::uint32_t;
  using Symbol = std::uint32_t;

  Dfa() = default;
  Dfa(std::vector<std::string> atoms, std::size_t states, State initial, std::vector<State> table,
      std::vector<bool> accepting)
      : atoms_(std::move(atoms)),
        states_(states),
        initial_(initial),
        table_(std::move(table)),
        accepting_(std::move(accepting)) {
    compute_live();
  }

  const std::vector<std::string>& atoms() const noexcept { return atoms_; }
  std::size_t state_count() const noexcept { return states_; }
  std::size_t symbol_count() const noexcept { return std::size_t{1} << atoms_.size(); }
  State initial() const noexcept { return initial_; }
  bool is_accepting(State q) const { return accepting_[q]; }
  /// False for states from which no accepting state is reachable.
  bool can_accept(State q) const { return live_[q]; }
  State next(State q, Symbol sym) const { return table_[q * symbol_count() + sym]; }

  template <class Labels>
  Symbol symbol_for(const Labels& labels) const {
    Symbol sym = 0;
    for (std::size_t i = 0; i < atoms_.size(); ++i)
      if (std::find(std::begin(labels), std::end(labels), atoms_[i]) != std::end(labels)) sym |= Symbol{1} << i;
    return sym;
  }

  /// Outgoing transitions of `q` grouped by target, each guard rendered as a
  /// disjunctive normal form over atoms().
  std::vector<std::pair<State, std::string>> guards(State q) const;

 private:
  void compute_live() {
    live_.assign(states_, false);
    std::vector<std::vector<State>> rev(states_);
    for (State q = 0; q < states_; ++q)
      for (Symbol s = 0; s < symbol_count(); ++s) rev[next(q, s)].push_back(q);
    std::vector<State> work;
    for (State q = 0; q < states_; ++q)
      if (accepting_[q]) {
        live_[q] = true;
        work.push_back(q);
      }
    while (!work.empty()) {
      State q = work.back();
      work.pop_back();
      for (State p : rev[q])
        if (!live_[p]) {
          live_[p] = true;
          work.push_back(p);
        }
    }
  }

  std::vector<std::string> atoms_;
  std::size_t states_ = 0;
  State initial_ = 0;
  std::vector<State> table_;
  std::vector<bool> accepting_;
  std::vector<bool> live_;
};

namespace detail {

// Prime implicants by iterated merging, then a greedy cover.
inline std::string render_guard(const std::vector<std::uint32_t>& minterms, const std::vector<std::string>& atoms) {
  const std::uint32_t full = (std::uint32_t{1} << atoms.size()) - 1;
  if (minterms.size() == std::size_t{full} + 1) return "true";
  using Implicant = std::pair<std::uint32_t, std::uint32_t>;  // (value, don't-care mask)
  std::set<Implicant> current;
  for (auto m : minterms) current.insert({m, 0});
  std::set<Implicant> primes;
  while (!current.empty()) {
    std::set<Implicant> merged, used;
    for (auto a = current.begin(); a != current.end(); ++a) {
      for (auto b = std::next(a); b != current.end(); ++b) {
        if (a->second != b->second) continue;
        const std::uint32_t diff = a->first ^ b->first;
        if (diff && !(diff & (diff - 1))) {
          merged.insert({a->first & ~diff, a->second | diff});
          used.insert(*a);
          used.insert(*b);
        }
      }
    }
    for (const auto& i : current)
      if (!used.count(i)) primes.insert(i);
    current = std::move(merged);
  }
  std::set<std::uint32_t> uncovered(minterms.begin(), minterms.end());
  std::vector<Implicant> chosen;
  while (!uncovered.empty()) {
    Implicant best{};
    std::size_t best_cover = 0;
    for (const auto& p : primes) {
      std::size_t cover = 0;
      for (auto m : uncovered)
        if ((m & ~p.second) == p.first) ++cover;
      if (cover > best_cover) {
        best_cover = cover;
        best = p;
      }
    }
    chosen.push_back(best);
    for (auto it = uncovered.begin(); it != uncovered.end();)
      it = ((*it & ~best.second) == best.first) ? uncovered.erase(it) : std::next(it);
  }
  std::sort(chosen.begin(), chosen.end());
  std::string out;
  for (std::size_t t = 0; t < chosen.size(); ++t) {
    if (t) out += " | ";
    std::string term;
    for (std::size_t i = 0; i < atoms.size(); ++i) {
      if (chosen[t].second >> i & 1u) continue;
      if (!term.empty()) term += " & ";
      if (!(chosen[t].first >> i & 1u)) term += '!';
      term += atoms[i];
    }
    out += term.empty() ? "true" : term;
  }
  return out;
}

}  // namespace detail

inline std::vector<std::pair<Dfa::State, std::string>> Dfa::guards(State q) const {
  std::map<State, std::vector<std::uint32_t>> by_target;
  for (Symbol s = 0; s < symbol_count(); ++s) by_target[next(q, s)].push_back(s);
  std::vector<std::pair<State, std::string>> out;
  for (const auto& [t, ms] : by_target) out.push_back({t, detail::render_guard(ms, atoms_)});
  return out;
}

/// Moore partition refinement. States are renumbered in breadth-first
/// order from the initial state, so the result is canonical.
inline Dfa minimize(const Dfa& d) {
  const std::size_t n = d.state_count(), k = d.symbol_count();
  std::vector<std::uint32_t> cls(n);
  for (std::size_t q = 0; q < n; ++q) cls[q] = d.is_accepting(static_cast<Dfa::State>(q)) ? 1 : 0;
  std::size_t classes = 0;
  for (;;) {
    std::map<std::vector<std::uint32_t>, std::uint32_t> sig_ids;
    std::vector<std::uint32_t> next_cls(n);
    for (std::size_t q = 0; q < n; ++q) {
      std::vector<std::uint32_t> sig{cls[q]};
      for (std::size_t s = 0; s < k; ++s)
        sig.push_back(cls[d.next(static_cast<Dfa::State>(q), static_cast<Dfa::Symbol>(s))]);
      auto [it, fresh] = sig_ids.emplace(std::move(sig), static_cast<std::uint32_t>(sig_ids.size()));
      next_cls[q] = it->second;
    }
    const std::size_t count = sig_ids.size();
    cls = std::move(next_cls);
    if (count == classes) break;
    classes = count;
  }
  // BFS renumbering over reachable classes.
  std::vector<std::int64_t> order(classes, -1);
  std::vector<std::size_t> rep(classes, 0);
  for (std::size_t q = n; q-- > 0;) rep[cls[q]] = q;
  std::vector<std::uint32_t> queue{cls[d.initial()]};
  order[cls[d.initial()]] = 0;
  for (std::size_t h = 0; h < queue.size(); ++h) {
    const auto c = queue[h];
    for (std::size_t s = 0; s < k; ++s) {
      const auto t = cls[d.next(static_cast<Dfa::State>(rep[c]), static_cast<Dfa::Symbol>(s))];
      if (order[t] < 0) {
        order[t] = static_cast<std::int64_t>(queue.size());
        queue.push_back(t);
      }
    }
  }
  const std::size_t m = queue.size();
  std::vector<Dfa::State> table(m * k);
  std::vector<bool> acc(m);
  for (std::size_t i = 0; i < m; ++i) {
    const auto q = static_cast<Dfa::State>(rep[queue[i]]);
    acc[i] = d.is_accepting(q);
    for (std::size_t s = 0; s < k; ++s)
      table[i * k + s] = static_cast<Dfa::State>(order[cls[d.next(q, static_cast<Dfa::Symbol>(s))]]);
  }
  return Dfa(d.atoms(), m, 0, std::move(table), std::move(acc));
}

namespace detail {

// Residuals are positive Boolean combinations of closure subformulas kept in
// absorbed disjunctive normal form: a set of clauses, each a sorted set of
// subformula ids. {{}} is `true`, {} is `false`.
class Progression {
 public:
  using Clause = std::vector<int>;
  using Dnf = std::vector<Clause>;

  Progression(const Formula& root, const std::vector<std::string>& atoms) : atoms_(atoms) {
    root_ = intern(root);
  }

  int root() const { return root_; }
  std::size_t closure_size() const { return nodes_.size(); }

  Dnf step(const Dnf& residual, std::uint32_t sym) {
    Dnf out;
    for (const auto& clause : residual) {
      Dnf acc{{}};
      for (int id : clause) {
        acc = conj(acc, progress(id, sym));
        if (acc.empty()) break;
      }
      out.insert(out.end(), acc.begin(), acc.end());
    }
    return normalize(std::move(out));
  }

  static bool is_true(const Dnf& d) { return d.size() == 1 && d.front().empty(); }

 private:
  struct Node {
    FormulaKind kind;
    int atom = -1;
    std::vector<int> kids;
  };

  int intern(const Formula& f) {
    const std::string key = f.to_string();
    if (auto it = ids_.find(key); it != ids_.end()) return it->second;
    Node n{f.kind(), -1, {}};
    if (f.kind() == FormulaKind::Atom || f.kind() == FormulaKind::NegAtom) {
      n.atom = static_cast<int>(std::lower_bound(atoms_.begin(), atoms_.end(), f.name()) - atoms_.begin());
    }
    for (const auto& c : f.children()) n.kids.push_back(intern(c));
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back(std::move(n));
    ids_.emplace(key, id);
    return id;
  }

  static Dnf normalize(Dnf d) {
    for (auto& c : d) {
      std::sort(c.begin(), c.end());
      c.erase(std::unique(c.begin(), c.end()), c.end());
      if (c.empty()) return Dnf{{}};
    }
    std::sort(d.begin(), d.end(), [](const Clause& a, const Clause& b) {
      return a.size() != b.size() ? a.size() < b.size() : a < b;
    });
    d.erase(std::unique(d.begin(), d.end()), d.end());
    Dnf kept;
    for (auto& c : d) {
      bool subsumed = std::any_of(kept.begin(), kept.end(), [&](const Clause& k) {
        return std::includes(c.begin(), c.end(), k.begin(), k.end());
      });
      if (!subsumed) kept.push_back(std::move(c));
    }
    std::sort(kept.begin(), kept.end());
    return kept;
  }

  static Dnf conj(const Dnf& a, const Dnf& b) {
    Dnf out;
    for (const auto& x : a)
      for (const auto& y : b) {
        Clause c;
        std::set_union(x.begin(), x.end(), y.begin(), y.end(), std::back_inserter(c));
        out.push_back(std::move(c));
      }
    return normalize(std::move(out));
  }

  static Dnf disj(Dnf a, const Dnf& b) {
    a.insert(a.end(), b.begin(), b.end());
    return normalize(std::move(a));
  }

  const Dnf& progress(int id, std::uint32_t sym) {
    const std::uint64_t key = (static_cast<std::uint64_t>(id) << 32) | sym;
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;
    const Node& n = nodes_[id];
    Dnf r;
    switch (n.kind) {
      case FormulaKind::Atom: r = (sym >> n.atom & 1u) ? Dnf{{}} : Dnf{}; break;
      case FormulaKind::NegAtom: r = (sym >> n.atom & 1u) ? Dnf{} : Dnf{{}}; break;
      case FormulaKind::And: r = conj(progress(n.kids[0], sym), progress(n.kids[1], sym)); break;
      case FormulaKind::Or: r = disj(progress(n.kids[0], sym), progress(n.kids[1], sym)); break;
      case FormulaKind::Next: r = Dnf{{n.kids[0]}}; break;
      case FormulaKind::Until:
        r = disj(progress(n.kids[1], sym), conj(progress(n.kids[0], sym), Dnf{{id}}));
        break;
      case FormulaKind::Eventually: r = disj(progress(n.kids[0], sym), Dnf{{id}}); break;
    }
    return memo_.emplace(key, std::move(r)).first->second;
  }

  std::vector<std::string> atoms_;
  std::vector<Node> nodes_;
  std::map<std::string, int> ids_;
  std::unordered_map<std::uint64_t, Dnf> memo_;
  int root_ = 0;
};

}  // namespace detail

inline constexpr std::size_t kMaxFormulaAtoms = 16;

/// Derivative construction: states are residual obligations after reading
/// a prefix; the `true` residual is the absorbing accepting state and the
/// `false` residual the reject sink. The result is minimized.
inline Dfa to_dfa(const Formula& f) {
  const auto atoms = f.atoms();
  if (atoms.size() > kMaxFormulaAtoms)
    throw ValidationError("formula has " + std::to_string(atoms.size()) + " atoms; at most " +
                          std::to_string(kMaxFormulaAtoms) + " are supported");
  detail::Progression prog(f, atoms);
  using Dnf = detail::Progression::Dnf;
  const std::size_t k = std::size_t{1} << atoms.size();
  std::map<Dnf, Dfa::State> ids;
  std::vector<Dnf> residuals;
  std::vector<Dfa::State> table;
  auto id_of = [&](Dnf r) {
    auto [it, fresh] = ids.emplace(r, static_cast<Dfa::State>(residuals.size()));
    if (fresh) residuals.push_back(std::move(r));
    return it->second;
  };
  id_of(Dnf{{prog.root()}});
  for (std::size_t i = 0; i < residuals.size(); ++i) {
    table.resize((i + 1) * k);
    for (std::size_t s = 0; s < k; ++s) {
      Dnf next = prog.step(residuals[i], static_cast<std::uint32_t>(s));
      table[i * k + s] = id_of(std::move(next));
    }
  }
  std::vector<bool> acc(residuals.size());
  for (std::size_t i = 0; i < residuals.size(); ++i) acc[i] = detail::Progression::is_true(residuals[i]);
  return minimize(Dfa(atoms, residuals.size(), 0, std::move(table), std::move(acc)));
}

using PropSet = std::set<std::string>;

/// Runs `word` from the initial state; true iff the run ends in an
/// accepting state (equivalently, ever visits one).
template <class Word>
bool accepts(const Dfa& d, const Word& word) {
  Dfa::State q = d.initial();
  for (const auto& symbol : word) q = d.next(q, d.symbol_for(symbol));
  return d.is_accepting(q);
}

inline bool accepts(const Dfa& d, std::initializer_list<PropSet> word) {
  return accepts<std::initializer_list<PropSet>>(d, word);
}

/// Debug rendering: one block per state listing guarded transitions.
inline std::string export_dfa(const Dfa& d) {
  std::ostringstream out;
  out << "atoms:";
  for (const auto& a : d.atoms()) out << ' ' << a;
  out << "\nstates: " << d.state_count() << "\ninitial: " << d.initial() << '\n';
  for (Dfa::State q = 0; q < d.state_count(); ++q) {
    out << "state " << q;
    if (d.is_accepting(q)) out << " accepting";
    if (!d.can_accept(q)) out << " reject";
    out << '\n';
    for (const auto& [t, g] : d.guards(q)) out << "  -> " << t << " : " << g << '\n';
  }
  return out.str();
}

}  // namespace fairfleet
