#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "wigner/fr.hpp"

namespace wigner {

// Scenario description files: factor/agent declarations, basis definitions
// with exact amplitude expressions, a preparation, measurement steps and
// statements. Amplitude literals are restricted to rational * sqrt(rational)
// so everything stays inside the exact number field.

struct Diagnostic {
  enum class Severity { kError, kWarning };
  Severity severity = Severity::kError;
  std::size_t line = 0, col = 0;
  std::string message;
  std::string hint;

  std::string str() const {
    std::string out = severity == Severity::kError ? "error" : "warning";
    out += " at " + std::to_string(line) + ":" + std::to_string(col) + ": " +
           message;
    if (!hint.empty()) out += " (" + hint + ")";
    return out;
  }
  friend bool operator==(const Diagnostic&, const Diagnostic&) = default;
};

// ---------------------------------------------------------------------------
// AST

struct DocTerm {
  ExactAmp coefficient;  // signed, single q*sqrt(r) term
  std::vector<std::string> labels;
  friend bool operator==(const DocTerm&, const DocTerm&) = default;
};

struct DocFactor {
  std::string name;
  std::vector<std::string> labels;  // empty for agent sugar
  bool is_agent = false;
  friend bool operator==(const DocFactor&, const DocFactor&) = default;
};

struct DocBasis {
  std::string name;
  std::vector<std::string> targets;
  std::vector<std::pair<std::string, std::vector<DocTerm>>> outcomes;
  friend bool operator==(const DocBasis&, const DocBasis&) = default;
};

struct DocPrepare {
  std::vector<DocTerm> terms;
  friend bool operator==(const DocPrepare&, const DocPrepare&) = default;
};

struct DocMeasure {
  std::string what;  // factor or basis name
  std::string by;    // agent/recorder factor
  std::optional<std::string> variable;
  bool collapse = false;
  std::optional<std::string> select;
  friend bool operator==(const DocMeasure&, const DocMeasure&) = default;
};

struct DocControl {
  std::string control;
  std::string case_label;
  std::string unitary;
  std::string target;
  friend bool operator==(const DocControl&, const DocControl&) = default;
};

struct DocStatement {
  std::string id;
  bool certain = true;
  std::vector<std::pair<std::string, std::string>> event;
  std::vector<std::pair<std::string, std::string>> given;
  std::optional<std::string> expect;  // holds / fails / vacuous
  friend bool operator==(const DocStatement&, const DocStatement&) = default;
};

struct DocOption {
  std::string name;
  std::string value;
  friend bool operator==(const DocOption&, const DocOption&) = default;
};

using Decl = std::variant<DocFactor, DocBasis, DocPrepare, DocMeasure,
                          DocControl, DocStatement, DocOption>;

struct ScenarioDoc {
  std::vector<Decl> decls;
  friend bool operator==(const ScenarioDoc&, const ScenarioDoc&) = default;
};

// ---------------------------------------------------------------------------
// Lexer

namespace dsl_detail {

struct Token {
  enum class Kind {
    kIdent,
    kInt,
    kLBrace,
    kRBrace,
    kLParen,
    kRParen,
    kComma,
    kEquals,
    kColon,
    kPlus,
    kMinus,
    kSlash,
    kTensor,
    kEnd,
    kBad,
  };
  Kind kind = Kind::kEnd;
  std::string text;
  std::size_t line = 1, col = 1;
};

inline const char* token_name(Token::Kind k) {
  switch (k) {
    case Token::Kind::kIdent: return "identifier";
    case Token::Kind::kInt: return "number";
    case Token::Kind::kLBrace: return "'{'";
    case Token::Kind::kRBrace: return "'}'";
    case Token::Kind::kLParen: return "'('";
    case Token::Kind::kRParen: return "')'";
    case Token::Kind::kComma: return "','";
    case Token::Kind::kEquals: return "'='";
    case Token::Kind::kColon: return "':'";
    case Token::Kind::kPlus: return "'+'";
    case Token::Kind::kMinus: return "'-'";
    case Token::Kind::kSlash: return "'/'";
    case Token::Kind::kTensor: return "'⊗'";
    case Token::Kind::kEnd: return "end of input";
    case Token::Kind::kBad: return "bad token";
  }
  return "?";
}

inline std::vector<Token> lex(const std::string& src,
                              std::vector<Diagnostic>& diags) {
  std::vector<Token> out;
  std::size_t line = 1, col = 1, i = 0;
  auto push = [&](Token::Kind k, std::string text, std::size_t c) {
    out.push_back({k, std::move(text), line, c});
  };
  while (i < src.size()) {
    char c = src[i];
    if (c == '\n') {
      ++line;
      col = 1;
      ++i;
      continue;
    }
    if (c == ' ' || c == '\t' || c == '\r') {
      ++col;
      ++i;
      continue;
    }
    if (c == '#') {
      while (i < src.size() && src[i] != '\n') ++i;
      continue;
    }
    std::size_t start_col = col;
    auto single = [&](Token::Kind k) {
      push(k, std::string(1, c), start_col);
      ++i;
      ++col;
    };
    if (c == '{') { single(Token::Kind::kLBrace); continue; }
    if (c == '}') { single(Token::Kind::kRBrace); continue; }
    if (c == '(') { single(Token::Kind::kLParen); continue; }
    if (c == ')') { single(Token::Kind::kRParen); continue; }
    if (c == ',') { single(Token::Kind::kComma); continue; }
    if (c == '=') { single(Token::Kind::kEquals); continue; }
    if (c == ':') { single(Token::Kind::kColon); continue; }
    if (c == '+') { single(Token::Kind::kPlus); continue; }
    if (c == '-') { single(Token::Kind::kMinus); continue; }
    if (c == '/') { single(Token::Kind::kSlash); continue; }
    if (c == '*') {
      push(Token::Kind::kTensor, "*", start_col);
      ++i;
      ++col;
      continue;
    }
    if (static_cast<unsigned char>(c) == 0xE2 && i + 2 < src.size() &&
        static_cast<unsigned char>(src[i + 1]) == 0x8A &&
        static_cast<unsigned char>(src[i + 2]) == 0x97) {
      push(Token::Kind::kTensor, "⊗", start_col);
      i += 3;
      ++col;
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      std::string num;
      while (i < src.size() &&
             std::isdigit(static_cast<unsigned char>(src[i]))) {
        num += src[i++];
        ++col;
      }
      if (i < src.size() && src[i] == '.') {
        while (i < src.size() &&
               (src[i] == '.' ||
                std::isdigit(static_cast<unsigned char>(src[i])))) {
          num += src[i++];
          ++col;
        }
        diags.push_back({Diagnostic::Severity::kError, line, start_col,
                         "floating-point literal '" + num + "'",
                         "write amplitudes as p/q, p/sqrt(n) or sqrt(p/q)"});
        push(Token::Kind::kBad, num, start_col);
        continue;
      }
      push(Token::Kind::kInt, num, start_col);
      continue;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::string id;
      while (i < src.size() &&
             (std::isalnum(static_cast<unsigned char>(src[i])) ||
              src[i] == '_')) {
        id += src[i++];
        ++col;
      }
      push(Token::Kind::kIdent, id, start_col);
      continue;
    }
    diags.push_back({Diagnostic::Severity::kError, line, start_col,
                     "unexpected character '" + std::string(1, c) + "'", ""});
    push(Token::Kind::kBad, std::string(1, c), start_col);
    ++i;
    ++col;
  }
  out.push_back({Token::Kind::kEnd, "", line, col});
  return out;
}

}  // namespace dsl_detail

// ---------------------------------------------------------------------------
// Parser

struct ParseResult {
  std::optional<ScenarioDoc> doc;
  std::vector<Diagnostic> diagnostics;
  bool ok() const { return doc.has_value() && diagnostics.empty(); }
};

namespace dsl_detail {

class Parser {
 public:
  Parser(std::vector<Token> toks, std::vector<Diagnostic>& diags)
      : toks_(std::move(toks)), diags_(diags) {}

  ScenarioDoc parse() {
    ScenarioDoc doc;
    while (!at(Token::Kind::kEnd)) {
      std::size_t before = pos_;
      if (!parse_decl(doc)) sync();
      if (pos_ == before) ++pos_;  // always make progress
    }
    return doc;
  }

 private:
  const Token& cur() const { return toks_[pos_]; }
  bool at(Token::Kind k) const { return cur().kind == k; }
  bool at_kw(const char* kw) const {
    return at(Token::Kind::kIdent) && cur().text == kw;
  }
  const Token& next() { return toks_[pos_++]; }

  void fail(const std::string& msg, const std::string& hint = "") {
    diags_.push_back({Diagnostic::Severity::kError, cur().line, cur().col, msg,
                      hint});
  }

  bool expect(Token::Kind k, const char* what) {
    if (at(k)) {
      ++pos_;
      return true;
    }
    fail(std::string("expected ") + what + ", found " +
         token_name(cur().kind) +
         (cur().text.empty() ? "" : " '" + cur().text + "'"));
    return false;
  }

  std::optional<std::string> ident(const char* what) {
    if (at(Token::Kind::kIdent)) return next().text;
    fail(std::string("expected ") + what + ", found " +
         token_name(cur().kind));
    return std::nullopt;
  }

  // an outcome/basis label: identifier or bare integer (e.g. the blank `0`)
  std::optional<std::string> label(const char* what) {
    if (at(Token::Kind::kIdent) || at(Token::Kind::kInt)) return next().text;
    fail(std::string("expected ") + what + ", found " +
         token_name(cur().kind));
    return std::nullopt;
  }

  void sync() {
    static const char* kKeywords[] = {"factor", "agent", "basis", "prepare",
                                      "measure", "control", "statement",
                                      "option"};
    while (!at(Token::Kind::kEnd)) {
      if (at(Token::Kind::kIdent))
        for (const char* kw : kKeywords)
          if (cur().text == kw) return;
      ++pos_;
    }
  }

  std::optional<Rational> rational() {
    if (!at(Token::Kind::kInt)) {
      fail("expected a number");
      return std::nullopt;
    }
    std::int64_t num = std::stoll(next().text);
    std::int64_t den = 1;
    if (at(Token::Kind::kSlash) &&
        toks_[pos_ + 1].kind == Token::Kind::kInt) {
      ++pos_;
      den = std::stoll(next().text);
      if (den == 0) {
        fail("zero denominator");
        return std::nullopt;
      }
    }
    return Rational(num, den);
  }

  // coef := RATIONAL | RATIONAL "/" "sqrt" "(" INT ")" | "sqrt" "(" RATIONAL ")"
  std::optional<ExactAmp> coef() {
    if (at_kw("sqrt")) {
      ++pos_;
      if (!expect(Token::Kind::kLParen, "'('")) return std::nullopt;
      auto r = rational();
      if (!r) return std::nullopt;
      if (!expect(Token::Kind::kRParen, "')'")) return std::nullopt;
      if (r->value() < 0) {
        fail("negative radicand");
        return std::nullopt;
      }
      return ExactAmp::sqrt_of(*r);
    }
    auto q = rational();
    if (!q) return std::nullopt;
    if (at(Token::Kind::kSlash) &&
        toks_[pos_ + 1].kind == Token::Kind::kIdent &&
        toks_[pos_ + 1].text == "sqrt") {
      pos_ += 2;
      if (!expect(Token::Kind::kLParen, "'('")) return std::nullopt;
      if (!at(Token::Kind::kInt)) {
        fail("expected an integer radicand");
        return std::nullopt;
      }
      std::int64_t n = std::stoll(next().text);
      if (!expect(Token::Kind::kRParen, "')'")) return std::nullopt;
      if (n <= 0) {
        fail("radicand must be positive");
        return std::nullopt;
      }
      // q / sqrt(n) = (q/n) * sqrt(n)
      return ExactAmp::sqrt_term(*q / Rational(n), Rational(n));
    }
    return ExactAmp(*q);
  }

  // term := coef IDENT ("⊗" IDENT)*
  std::optional<DocTerm> term(bool negative) {
    auto c = coef();
    if (!c) return std::nullopt;
    DocTerm t;
    t.coefficient = negative ? -*c : *c;
    auto first = label("a basis label");
    if (!first) return std::nullopt;
    t.labels.push_back(*first);
    while (at(Token::Kind::kTensor)) {
      ++pos_;
      auto l = label("a basis label");
      if (!l) return std::nullopt;
      t.labels.push_back(*l);
    }
    return t;
  }

  std::optional<std::vector<DocTerm>> ampexpr() {
    std::vector<DocTerm> terms;
    bool neg = false;
    if (at(Token::Kind::kMinus)) {
      neg = true;
      ++pos_;
    }
    auto t = term(neg);
    if (!t) return std::nullopt;
    terms.push_back(std::move(*t));
    while (at(Token::Kind::kPlus) || at(Token::Kind::kMinus)) {
      bool minus = at(Token::Kind::kMinus);
      ++pos_;
      auto more = term(minus);
      if (!more) return std::nullopt;
      terms.push_back(std::move(*more));
    }
    return terms;
  }

  std::optional<std::vector<std::pair<std::string, std::string>>> predicate() {
    std::vector<std::pair<std::string, std::string>> out;
    while (true) {
      auto v = ident("a variable name");
      if (!v) return std::nullopt;
      if (!expect(Token::Kind::kEquals, "'='")) return std::nullopt;
      auto l = label("an outcome label");
      if (!l) return std::nullopt;
      out.push_back({*v, *l});
      if (!at(Token::Kind::kComma)) break;
      ++pos_;
    }
    return out;
  }

  bool parse_decl(ScenarioDoc& doc) {
    if (at_kw("factor")) {
      ++pos_;
      DocFactor f;
      auto n = ident("a factor name");
      if (!n) return false;
      f.name = *n;
      if (!expect(Token::Kind::kLBrace, "'{'")) return false;
      while (true) {
        auto l = label("a basis label");
        if (!l) return false;
        f.labels.push_back(*l);
        if (at(Token::Kind::kComma)) {
          ++pos_;
          continue;
        }
        break;
      }
      if (!expect(Token::Kind::kRBrace, "'}'")) return false;
      if (f.labels.size() < 2) {
        fail("factor '" + f.name + "' needs at least two labels");
        return false;
      }
      doc.decls.push_back(std::move(f));
      return true;
    }
    if (at_kw("agent")) {
      ++pos_;
      DocFactor f;
      f.is_agent = true;
      auto n = ident("an agent name");
      if (!n) return false;
      f.name = *n;
      doc.decls.push_back(std::move(f));
      return true;
    }
    if (at_kw("basis")) {
      ++pos_;
      DocBasis b;
      auto n = ident("a basis name");
      if (!n) return false;
      b.name = *n;
      if (!at_kw("on")) {
        fail("expected 'on'");
        return false;
      }
      ++pos_;
      while (true) {
        auto t = ident("a target factor");
        if (!t) return false;
        b.targets.push_back(*t);
        if (at(Token::Kind::kTensor)) {
          ++pos_;
          continue;
        }
        break;
      }
      if (!expect(Token::Kind::kLBrace, "'{'")) return false;
      while (!at(Token::Kind::kRBrace)) {
        auto l = label("an outcome label");
        if (!l) return false;
        if (!expect(Token::Kind::kEquals, "'='")) return false;
        auto e = ampexpr();
        if (!e) return false;
        b.outcomes.push_back({*l, std::move(*e)});
        if (at(Token::Kind::kEnd)) {
          fail("unterminated basis block");
          return false;
        }
      }
      ++pos_;  // '}'
      if (b.outcomes.empty()) {
        fail("basis '" + b.name + "' declares no outcomes");
        return false;
      }
      doc.decls.push_back(std::move(b));
      return true;
    }
    if (at_kw("prepare")) {
      ++pos_;
      auto e = ampexpr();
      if (!e) return false;
      doc.decls.push_back(DocPrepare{std::move(*e)});
      return true;
    }
    if (at_kw("measure")) {
      ++pos_;
      DocMeasure m;
      auto w = ident("a factor or basis name");
      if (!w) return false;
      m.what = *w;
      if (!at_kw("by")) {
        fail("expected 'by'");
        return false;
      }
      ++pos_;
      auto by = ident("a recorder name");
      if (!by) return false;
      m.by = *by;
      if (at_kw("as")) {
        ++pos_;
        auto v = ident("a variable name");
        if (!v) return false;
        m.variable = *v;
      }
      if (at_kw("collapse")) {
        ++pos_;
        m.collapse = true;
        if (at(Token::Kind::kEquals)) {
          ++pos_;
          auto s = label("an outcome label");
          if (!s) return false;
          m.select = *s;
        }
      }
      doc.decls.push_back(std::move(m));
      return true;
    }
    if (at_kw("control")) {
      ++pos_;
      DocControl c;
      auto ctl = ident("a control factor");
      if (!ctl) return false;
      c.control = *ctl;
      if (!expect(Token::Kind::kColon, "':'")) return false;
      auto cl = label("a control label");
      if (!cl) return false;
      c.case_label = *cl;
      if (!at_kw("apply")) {
        fail("expected 'apply'");
        return false;
      }
      ++pos_;
      auto u = ident("a unitary name");
      if (!u) return false;
      c.unitary = *u;
      if (!at_kw("on")) {
        fail("expected 'on'");
        return false;
      }
      ++pos_;
      auto t = ident("a target factor");
      if (!t) return false;
      c.target = *t;
      doc.decls.push_back(std::move(c));
      return true;
    }
    if (at_kw("statement")) {
      ++pos_;
      DocStatement s;
      auto id = ident("a statement id");
      if (!id) return false;
      s.id = *id;
      if (!expect(Token::Kind::kColon, "':'")) return false;
      if (at_kw("certain"))
        s.certain = true;
      else if (at_kw("possible"))
        s.certain = false;
      else {
        fail("expected 'certain' or 'possible'");
        return false;
      }
      ++pos_;
      if (!expect(Token::Kind::kLParen, "'('")) return false;
      auto ev = predicate();
      if (!ev) return false;
      s.event = std::move(*ev);
      if (at_kw("given")) {
        ++pos_;
        if (!s.certain) {
          fail("'given' is only allowed in certain(...)");
          return false;
        }
        auto g = predicate();
        if (!g) return false;
        s.given = std::move(*g);
      }
      if (!expect(Token::Kind::kRParen, "')'")) return false;
      if (at_kw("expect")) {
        ++pos_;
        auto e = ident("holds, fails or vacuous");
        if (!e) return false;
        std::string lower;
        for (char ch : *e) lower += std::tolower(ch);
        if (lower != "holds" && lower != "fails" && lower != "vacuous") {
          fail("expected holds, fails or vacuous after 'expect'");
          return false;
        }
        s.expect = lower;
      }
      doc.decls.push_back(std::move(s));
      return true;
    }
    if (at_kw("option")) {
      ++pos_;
      DocOption o;
      auto n = ident("an option name");
      if (!n) return false;
      o.name = *n;
      if (!expect(Token::Kind::kEquals, "'='")) return false;
      auto v = label("an option value");
      if (!v) return false;
      o.value = *v;
      doc.decls.push_back(std::move(o));
      return true;
    }
    fail("expected a declaration (factor, agent, basis, prepare, measure, "
         "control, statement or option)");
    return false;
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  std::vector<Diagnostic>& diags_;
};

}  // namespace dsl_detail

inline ParseResult parse_scenario(const std::string& text) {
  ParseResult res;
  auto toks = dsl_detail::lex(text, res.diagnostics);
  dsl_detail::Parser p(std::move(toks), res.diagnostics);
  ScenarioDoc doc = p.parse();
  if (res.diagnostics.empty()) res.doc = std::move(doc);
  return res;
}

// ---------------------------------------------------------------------------
// Pretty printer (canonical form; reparsing yields an identical AST)

namespace dsl_detail {

inline std::string coef_str(const ExactAmp& c) {
  // single q*sqrt(r) term, printed in the coef grammar
  auto [q, r] = c.single_term();
  if (r == 1) return q.str();
  // q*sqrt(r) = (q*r)/sqrt(r)
  return (q * Rational(r)).str() + "/sqrt(" + std::to_string(r) + ")";
}

inline std::string terms_str(const std::vector<DocTerm>& terms) {
  std::string out;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    ExactAmp c = terms[i].coefficient;
    bool neg = c.value() < 0;
    if (i == 0)
      out += neg ? "-" : "";
    else
      out += neg ? " - " : " + ";
    out += coef_str(neg ? -c : c) + " ";
    for (std::size_t k = 0; k < terms[i].labels.size(); ++k) {
      if (k) out += "⊗";
      out += terms[i].labels[k];
    }
  }
  return out;
}

inline std::string predicate_str(
    const std::vector<std::pair<std::string, std::string>>& p) {
  std::string out;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (i) out += ", ";
    out += p[i].first + "=" + p[i].second;
  }
  return out;
}

}  // namespace dsl_detail

inline std::string print_scenario(const ScenarioDoc& doc) {
  std::string out;
  for (const auto& d : doc.decls) {
    if (const auto* f = std::get_if<DocFactor>(&d)) {
      if (f->is_agent) {
        out += "agent " + f->name + "\n";
      } else {
        out += "factor " + f->name + " { ";
        for (std::size_t i = 0; i < f->labels.size(); ++i)
          out += (i ? ", " : "") + f->labels[i];
        out += " }\n";
      }
    } else if (const auto* b = std::get_if<DocBasis>(&d)) {
      out += "basis " + b->name + " on ";
      for (std::size_t i = 0; i < b->targets.size(); ++i)
        out += (i ? "⊗" : "") + b->targets[i];
      out += " {\n";
      for (const auto& [l, terms] : b->outcomes)
        out += "  " + l + " = " + dsl_detail::terms_str(terms) + "\n";
      out += "}\n";
    } else if (const auto* pr = std::get_if<DocPrepare>(&d)) {
      out += "prepare " + dsl_detail::terms_str(pr->terms) + "\n";
    } else if (const auto* m = std::get_if<DocMeasure>(&d)) {
      out += "measure " + m->what + " by " + m->by;
      if (m->variable) out += " as " + *m->variable;
      if (m->collapse) {
        out += " collapse";
        if (m->select) out += " = " + *m->select;
      }
      out += "\n";
    } else if (const auto* c = std::get_if<DocControl>(&d)) {
      out += "control " + c->control + " : " + c->case_label + " apply " +
             c->unitary + " on " + c->target + "\n";
    } else if (const auto* s = std::get_if<DocStatement>(&d)) {
      out += "statement " + s->id + " : " +
             (s->certain ? "certain(" : "possible(") +
             dsl_detail::predicate_str(s->event);
      if (!s->given.empty())
        out += " given " + dsl_detail::predicate_str(s->given);
      out += ")";
      if (s->expect) out += " expect " + *s->expect;
      out += "\n";
    } else if (const auto* o = std::get_if<DocOption>(&d)) {
      out += "option " + o->name + " = " + o->value + "\n";
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Resolution: AST -> runnable Scenario

struct ResolvedScenario {
  Scenario scenario;
  std::map<std::string, std::string> options;
  std::vector<Diagnostic> diagnostics;
  // warnings don't invalidate the scenario
  bool ok() const {
    for (const auto& d : diagnostics)
      if (d.severity == Diagnostic::Severity::kError) return false;
    return true;
  }
};

namespace dsl_detail {

inline bool builtin_unitary(const std::string& name, Matrix& u,
                            ExactMatrix& eu) {
  if (name == "hadamard") {
    double s = 1.0 / std::sqrt(2.0);
    ExactAmp e = ExactAmp::sqrt_of(Rational(1, 2));
    u = {{s, s}, {s, -s}};
    eu = {{e, e}, {e, -e}};
    return true;
  }
  if (name == "identity") {
    u = {{1.0, 0.0}, {0.0, 1.0}};
    eu = {{ExactAmp(1), ExactAmp()}, {ExactAmp(), ExactAmp(1)}};
    return true;
  }
  if (name == "flip") {
    u = {{0.0, 1.0}, {1.0, 0.0}};
    eu = {{ExactAmp(), ExactAmp(1)}, {ExactAmp(1), ExactAmp()}};
    return true;
  }
  return false;
}

}  // namespace dsl_detail

inline ResolvedScenario resolve_scenario(const ScenarioDoc& doc,
                                         const std::string& name = "scenario") {
  ResolvedScenario res;
  auto err = [&](const std::string& msg, const std::string& hint = "") {
    res.diagnostics.push_back(
        {Diagnostic::Severity::kError, 0, 0, msg, hint});
  };

  // pass 1: collect declarations by kind, preserving factor order
  std::vector<DocFactor> factors;
  std::vector<const DocBasis*> bases;
  const DocPrepare* prepare = nullptr;
  std::vector<const Decl*> steps;
  std::vector<const DocStatement*> statements;
  for (const auto& d : doc.decls) {
    if (const auto* f = std::get_if<DocFactor>(&d)) {
      factors.push_back(*f);
    } else if (const auto* b = std::get_if<DocBasis>(&d)) {
      bases.push_back(b);
    } else if (const auto* p = std::get_if<DocPrepare>(&d)) {
      if (prepare) err("duplicate prepare clause");
      prepare = p;
    } else if (std::holds_alternative<DocMeasure>(d) ||
               std::holds_alternative<DocControl>(d)) {
      steps.push_back(&d);
    } else if (const auto* s = std::get_if<DocStatement>(&d)) {
      statements.push_back(s);
    } else if (const auto* o = std::get_if<DocOption>(&d)) {
      if (o->name != "seed" && o->name != "kernel")
        err("unknown option '" + o->name + "'",
            "supported options: seed, kernel");
      else
        res.options[o->name] = o->value;
    }
  }
  if (!prepare) {
    err("no preparation", "add a 'prepare <amplitude terms>' clause");
    return res;
  }
  if (factors.empty()) {
    err("no factors declared");
    return res;
  }

  auto find_basis = [&](const std::string& n) -> const DocBasis* {
    for (const auto* b : bases)
      if (b->name == n) return b;
    return nullptr;
  };
  auto find_factor = [&](const std::string& n) -> DocFactor* {
    for (auto& f : factors)
      if (f.name == n) return &f;
    return nullptr;
  };

  // agent sugar: blank + one label per outcome of the agent's first
  // measurement
  for (auto& f : factors) {
    if (!f.is_agent) continue;
    const DocMeasure* first = nullptr;
    for (const auto* d : steps)
      if (const auto* m = std::get_if<DocMeasure>(d))
        if (m->by == f.name) {
          first = m;
          break;
        }
    if (!first) {
      err("agent '" + f.name + "' never measures",
          "declare it as a factor with explicit labels instead");
      continue;
    }
    f.labels = {"0"};
    if (const DocBasis* b = find_basis(first->what)) {
      for (const auto& [l, terms] : b->outcomes) f.labels.push_back(l);
    } else if (const DocFactor* mf = find_factor(first->what)) {
      if (mf->is_agent && mf->labels.empty()) {
        err("agent '" + f.name + "' measures agent '" + mf->name +
            "' whose labels are not resolved yet",
            "reorder the declarations or use explicit factors");
        continue;
      }
      for (const auto& l : mf->labels)
        if (l != "0") f.labels.push_back(l);
    } else {
      err("agent '" + f.name + "' measures unknown '" + first->what + "'");
    }
  }
  if (!res.diagnostics.empty()) return res;

  SpacePtr space;
  try {
    std::vector<FactorSpace> fs;
    for (const auto& f : factors) fs.push_back(make_factor(f.name, f.labels));
    space = make_product_space(std::move(fs));
  } catch (const error& e) {
    err(e.what());
    return res;
  }
  res.scenario.space = space;
  res.scenario.name = name;

  // bases
  std::map<std::string, ObservableBasis> resolved_bases;
  for (const auto* b : bases) {
    ObservableBasis ob;
    ob.name = b->name;
    ob.target_factors = b->targets;
    std::size_t sub_dim = 1;
    bool bad = false;
    for (const auto& t : b->targets) {
      const DocFactor* f = find_factor(t);
      if (!f) {
        err("basis '" + b->name + "' targets unknown factor '" + t + "'");
        bad = true;
        break;
      }
      sub_dim *= f->labels.size();
    }
    if (bad) continue;
    for (const auto& [olabel, terms] : b->outcomes) {
      BasisOutcome o;
      o.label = olabel;
      o.amps.assign(sub_dim, Complex(0.0));
      o.exact = std::vector<ExactAmp>(sub_dim);
      for (const auto& t : terms) {
        if (t.labels.size() != b->targets.size()) {
          err("outcome '" + olabel + "' of basis '" + b->name + "' has " +
              std::to_string(t.labels.size()) + " labels for " +
              std::to_string(b->targets.size()) + " targets");
          bad = true;
          break;
        }
        std::size_t idx = 0;
        for (std::size_t k = 0; k < b->targets.size(); ++k) {
          const DocFactor* f = find_factor(b->targets[k]);
          auto it = std::find(f->labels.begin(), f->labels.end(),
                              t.labels[k]);
          if (it == f->labels.end()) {
            err("basis '" + b->name + "': '" + t.labels[k] +
                "' is not a label of factor '" + f->name + "'");
            bad = true;
            break;
          }
          idx = idx * f->labels.size() +
                static_cast<std::size_t>(it - f->labels.begin());
        }
        if (bad) break;
        (*o.exact)[idx] += t.coefficient;
      }
      if (bad) break;
      for (std::size_t i = 0; i < sub_dim; ++i)
        o.amps[i] = Complex((*o.exact)[i].value(), 0.0);
      ob.outcomes.push_back(std::move(o));
    }
    if (bad) continue;
    try {
      detail::check_orthonormal(ob);
      complete_basis(ob, *space);
    } catch (const error& e) {
      err(e.what(), "basis outcomes must be orthonormal unit vectors");
      continue;
    }
    resolved_bases[b->name] = std::move(ob);
  }

  // preparation
  for (const auto& t : prepare->terms) {
    if (t.labels.size() != factors.size()) {
      err("prepare term has " + std::to_string(t.labels.size()) +
          " labels for " + std::to_string(factors.size()) + " factors",
          "give one label per declared factor, in declaration order");
      return res;
    }
    res.scenario.preparation.push_back({t.coefficient, t.labels});
  }
  try {
    superpose(space, res.scenario.preparation);
  } catch (const error& e) {
    err(e.what());
    return res;
  }

  // steps
  for (const auto* d : steps) {
    if (const auto* m = std::get_if<DocMeasure>(d)) {
      MeasurementStep s;
      s.kind = MeasurementStep::Kind::kMeasure;
      auto it = resolved_bases.find(m->what);
      if (it != resolved_bases.end()) {
        s.basis = it->second;
      } else if (find_factor(m->what)) {
        s.basis = ObservableBasis::computational(*space, m->what);
      } else {
        err("measure step names unknown factor or basis '" + m->what + "'");
        continue;
      }
      if (!find_factor(m->by)) {
        err("recorder '" + m->by + "' is not a declared factor or agent");
        continue;
      }
      s.recorder = m->by;
      s.variable = m->variable ? *m->variable : m->by;
      s.collapse = m->collapse;
      if (m->select) {
        bool known = false;
        for (const auto& o : s.basis.outcomes)
          if (o.label == *m->select) known = true;
        if (!known) {
          err("selected outcome '" + *m->select + "' is not an outcome of '" +
              m->what + "'");
          continue;
        }
        s.selected_outcome = m->select;
      }
      res.scenario.steps.push_back(std::move(s));
    } else if (const auto* c = std::get_if<DocControl>(d)) {
      MeasurementStep s;
      s.kind = MeasurementStep::Kind::kControlled;
      const DocFactor* ctl = find_factor(c->control);
      const DocFactor* tgt = find_factor(c->target);
      if (!ctl) {
        err("control step names unknown factor '" + c->control + "'");
        continue;
      }
      if (!tgt) {
        err("control step targets unknown factor '" + c->target + "'");
        continue;
      }
      if (std::find(ctl->labels.begin(), ctl->labels.end(), c->case_label) ==
          ctl->labels.end()) {
        err("'" + c->case_label + "' is not a label of factor '" +
            c->control + "'");
        continue;
      }
      Matrix u;
      ExactMatrix eu;
      if (!dsl_detail::builtin_unitary(c->unitary, u, eu)) {
        err("unknown unitary '" + c->unitary + "'",
            "built-in unitaries: hadamard, identity, flip");
        continue;
      }
      if (tgt->labels.size() != u.size()) {
        err("unitary '" + c->unitary + "' needs a dimension-" +
            std::to_string(u.size()) + " target, but '" + c->target +
            "' has dimension " + std::to_string(tgt->labels.size()));
        continue;
      }
      s.control = c->control;
      s.targets = {c->target};
      s.cases[c->case_label] = u;
      s.exact_cases = std::map<std::string, ExactMatrix>{{c->case_label, eu}};
      res.scenario.steps.push_back(std::move(s));
    }
  }

  // statements
  std::set<std::string> known_vars;
  for (const auto& s : res.scenario.steps)
    if (s.kind == MeasurementStep::Kind::kMeasure)
      known_vars.insert(s.variable);
  for (const auto* ds : statements) {
    Statement s;
    s.id = ds->id;
    s.form = ds->certain ? Statement::Form::kCertain
                         : Statement::Form::kPossible;
    s.event.equals = ds->event;
    if (!ds->given.empty()) s.condition = Predicate{ds->given};
    if (ds->expect) {
      std::string up;
      for (char c : *ds->expect) up += std::toupper(c);
      s.expect = up;
    }
    std::map<std::string, std::string> mentioned(ds->event.begin(),
                                                 ds->event.end());
    for (const auto& [v, l] : ds->given) mentioned.emplace(v, l);
    for (const auto& [v, l] : mentioned)
      if (!known_vars.count(v))
        res.diagnostics.push_back(
            {Diagnostic::Severity::kWarning, 0, 0,
             "statement '" + s.id + "' mentions unrecorded variable '" + v +
                 "'",
             "it will evaluate as VACUOUS"});
    res.scenario.statements.push_back(std::move(s));
  }
  // warnings don't invalidate the scenario
  bool has_error = false;
  for (const auto& d : res.diagnostics)
    if (d.severity == Diagnostic::Severity::kError) has_error = true;
  if (has_error) res.scenario = Scenario{};
  return res;
}

inline ResolvedScenario load_scenario(const std::string& text,
                                      const std::string& name = "scenario") {
  ParseResult pr = parse_scenario(text);
  if (!pr.doc) {
    ResolvedScenario res;
    res.diagnostics = std::move(pr.diagnostics);
    return res;
  }
  return resolve_scenario(*pr.doc, name);
}

}  // namespace wigner
