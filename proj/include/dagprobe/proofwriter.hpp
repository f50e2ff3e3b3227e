#pragma once

// Best-effort converter from raw ProofWriter release records to normalized
// TheoryRecords. Only the first listed proof of each question is used;
// questions without a parseable proof (no proof, NAF steps, CWA-only
// annotations) are skipped and reported.
//
// Proof representations look like
//   ((((triple1) -> (rule5 % int2)) triple3) -> (rule1 % int1))
// where a parenthesized premise list is followed by "->" and the rule that
// fires, tagged with the intermediate it produces.

#include <cctype>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "dagprobe/error.hpp"
#include "dagprobe/ingest.hpp"
#include "json.hpp"

namespace dagprobe::proofwriter {

namespace detail {

struct ProofExpr {
  enum class Kind { leaf, group, step } kind = Kind::leaf;
  std::string id;          // leaf id, or produced intermediate for a step
  std::string rule;        // step only
  std::vector<ProofExpr> children;
};

class ProofParser {
 public:
  explicit ProofParser(std::string_view text) { tokenize(text); }

  ProofExpr parse() {
    ProofExpr e = expr();
    if (pos_ != tokens_.size()) fail("trailing tokens");
    return e;
  }

 private:
  std::vector<std::string> tokens_;
  std::size_t pos_ = 0;

  [[noreturn]] static void fail(const std::string& what) {
    throw FormatError("unparseable proof: " + what);
  }

  void tokenize(std::string_view s) {
    std::size_t i = 0;
    while (i < s.size()) {
      const char c = s[i];
      if (std::isspace(static_cast<unsigned char>(c)) || c == '[' || c == ']') {
        ++i;
      } else if (c == '(' || c == ')' || c == '%') {
        tokens_.emplace_back(1, c);
        ++i;
      } else if (c == '-' && i + 1 < s.size() && s[i + 1] == '>') {
        tokens_.emplace_back("->");
        i += 2;
      } else {
        std::size_t j = i;
        while (j < s.size() && (std::isalnum(static_cast<unsigned char>(s[j])) || s[j] == '_')) ++j;
        if (j == i) fail(std::string("unexpected character '") + c + "'");
        tokens_.emplace_back(s.substr(i, j - i));
        i = j;
      }
    }
  }

  const std::string& peek() const {
    static const std::string end;
    return pos_ < tokens_.size() ? tokens_[pos_] : end;
  }

  std::string take() {
    if (pos_ >= tokens_.size()) fail("unexpected end");
    return tokens_[pos_++];
  }

  void expect(std::string_view t) {
    if (take() != t) fail("expected '" + std::string(t) + "'");
  }

  static bool is_ident(const std::string& t) {
    return !t.empty() && t != "(" && t != ")" && t != "->" && t != "%";
  }

  ProofExpr expr() {
    if (is_ident(peek())) {
      ProofExpr leaf;
      leaf.id = take();
      if (leaf.id == "NAF") fail("negation-as-failure step");
      return leaf;
    }
    expect("(");
    std::vector<ProofExpr> items;
    while (peek() != ")" && peek() != "->") items.push_back(expr());
    if (peek() == "->") {
      take();
      ProofExpr step;
      step.kind = ProofExpr::Kind::step;
      if (peek() == "(") {
        take();
        step.rule = take();
        if (peek() == "%") {
          take();
          step.id = take();
        }
        expect(")");
      } else {
        step.rule = take();
      }
      expect(")");
      for (auto& item : items) {
        if (item.kind == ProofExpr::Kind::group) {
          for (auto& c : item.children) step.children.push_back(std::move(c));
        } else {
          step.children.push_back(std::move(item));
        }
      }
      return step;
    }
    expect(")");
    if (items.size() == 1) return std::move(items.front());
    ProofExpr group;
    group.kind = ProofExpr::Kind::group;
    group.children = std::move(items);
    return group;
  }
};

}  // namespace detail

struct ConversionResult {
  std::vector<TheoryRecord> records;
  std::vector<std::string> skipped;  // one diagnostic per skipped question
};

/// Converts one raw ProofWriter record (one theory, several questions).
inline ConversionResult convert_record(const nlohmann::json& raw) {
  ConversionResult out;
  const std::string base_id = raw.at("id").get<std::string>();
  const std::string theory = raw.at("theory").get<std::string>();

  std::vector<FactRecord> facts;
  if (raw.contains("triples"))
    for (const auto& [id, t] : raw.at("triples").items())
      facts.push_back({id, t.at("text").get<std::string>()});

  for (const auto& [qid, q] : raw.at("questions").items()) {
    const std::string example_id = base_id + "-" + qid;
    try {
      TheoryRecord rec;
      rec.example_id = example_id;
      rec.theory_text = theory;
      rec.query_text = q.at("question").get<std::string>();
      const auto& ans = q.at("answer");
      if (!ans.is_boolean()) throw FormatError("non-boolean answer");
      rec.gold_answer = ans.get<bool>();
      rec.facts = facts;

      std::string representation;
      nlohmann::json intermediates = nlohmann::json::object();
      if (q.contains("proofsWithIntermediates") && !q.at("proofsWithIntermediates").empty()) {
        const auto& first = q.at("proofsWithIntermediates").at(0);
        representation = first.at("representation").get<std::string>();
        if (first.contains("intermediates")) intermediates = first.at("intermediates");
      } else if (q.contains("proofs") && q.at("proofs").is_string()) {
        representation = q.at("proofs").get<std::string>();
        // "proofs" lists alternatives separated by "OR"; keep the first.
        if (auto cut = representation.find(" OR "); cut != std::string::npos)
          representation = representation.substr(0, cut) + "]";
      }
      if (representation.empty() || representation == "[]" || representation == "None")
        throw FormatError("no proof");

      const detail::ProofExpr tree = detail::ProofParser(representation).parse();
      std::size_t anonymous = 0;
      auto emit = [&](auto&& self, const detail::ProofExpr& e, bool root) -> std::string {
        if (e.kind == detail::ProofExpr::Kind::leaf) return e.id;
        if (e.kind == detail::ProofExpr::Kind::group) throw FormatError("dangling premise group");
        ProofStep step;
        for (const auto& c : e.children) step.premises.push_back(self(self, c, false));
        step.conclusion = e.id.empty() ? "answer" + std::to_string(anonymous++) : e.id;
        if (!e.id.empty() && intermediates.contains(e.id))
          step.text = intermediates.at(e.id).at("text").get<std::string>();
        else if (root)
          step.text = rec.query_text;
        else
          throw FormatError("intermediate '" + e.id + "' has no text");
        rec.proof_steps.push_back(std::move(step));
        return rec.proof_steps.back().conclusion;
      };
      emit(emit, tree, true);
      out.records.push_back(std::move(rec));
    } catch (const std::exception& ex) {
      out.skipped.push_back(example_id + ": " + ex.what());
    }
  }
  return out;
}

}  // namespace dagprobe::proofwriter
