#include "syneval/treebank.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace syneval {

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

struct Cursor {
  const std::string& text;
  std::size_t pos = 0;

  bool done() const { return pos >= text.size(); }
  char peek() const { return text[pos]; }
  void skip_space() {
    while (!done() && is_space(peek())) ++pos;
  }
  std::string read_symbol() {
    const std::size_t start = pos;
    while (!done() && !is_space(peek()) && peek() != '(' && peek() != ')') ++pos;
    return text.substr(start, pos - start);
  }
};

ParseTree parse_node(Cursor& cur) {
  cur.skip_space();
  if (cur.done()) throw MalformedInputError("unexpected end of input", cur.pos);
  if (cur.peek() != '(') {
    const std::size_t at = cur.pos;
    std::string tok = cur.read_symbol();
    if (tok.empty()) throw MalformedInputError("expected token or '('", at);
    return ParseTree::terminal(std::move(tok));
  }
  const std::size_t open_at = cur.pos;
  ++cur.pos;  // consume '('
  cur.skip_space();
  const std::size_t label_at = cur.pos;
  std::string label = cur.read_symbol();
  if (label.empty()) throw MalformedInputError("constituent without label", label_at);
  std::vector<ParseTree> kids;
  while (true) {
    cur.skip_space();
    if (cur.done()) throw MalformedInputError("unbalanced parentheses", cur.pos);
    if (cur.peek() == ')') {
      ++cur.pos;
      break;
    }
    kids.push_back(parse_node(cur));
  }
  if (kids.empty()) throw MalformedInputError("empty constituent", open_at);
  return ParseTree::internal(std::move(label), std::move(kids));
}

void render_into(const ParseTree& t, std::string& out) {
  if (t.is_terminal()) {
    out += t.token;
    return;
  }
  out += '(';
  out += t.label;
  for (const ParseTree& kid : t.children) {
    out += ' ';
    render_into(kid, out);
  }
  out += ')';
}

void collect_leaves(const ParseTree& t, std::vector<std::string>& out) {
  if (t.is_terminal()) {
    out.push_back(t.token);
    return;
  }
  for (const ParseTree& kid : t.children) collect_leaves(kid, out);
}

// Decodes one UTF-8 code point starting at i; returns its byte length
// (1 on malformed bytes, which then classify as Other).
std::size_t utf8_decode(const std::string& s, std::size_t i, char32_t& cp) {
  const unsigned char b0 = static_cast<unsigned char>(s[i]);
  if (b0 < 0x80) {
    cp = b0;
    return 1;
  }
  std::size_t len = 0;
  if ((b0 & 0xe0) == 0xc0) {
    cp = b0 & 0x1f;
    len = 2;
  } else if ((b0 & 0xf0) == 0xe0) {
    cp = b0 & 0x0f;
    len = 3;
  } else if ((b0 & 0xf8) == 0xf0) {
    cp = b0 & 0x07;
    len = 4;
  } else {
    cp = 0xfffd;
    return 1;
  }
  if (i + len > s.size()) {
    cp = 0xfffd;
    return 1;
  }
  for (std::size_t k = 1; k < len; ++k) {
    const unsigned char b = static_cast<unsigned char>(s[i + k]);
    if ((b & 0xc0) != 0x80) {
      cp = 0xfffd;
      return 1;
    }
    cp = (cp << 6) | (b & 0x3f);
  }
  return len;
}

bool is_digit_cp(char32_t c) {
  return (c >= U'0' && c <= U'9') || (c >= U'０' && c <= U'９');
}

bool is_latin_cp(char32_t c) {
  return (c >= U'A' && c <= U'Z') || (c >= U'a' && c <= U'z');
}

// ASCII punctuation plus the general/CJK/fullwidth punctuation blocks; close
// enough to the Unicode punctuation categories for corpus tokens.
bool is_punct_cp(char32_t c) {
  if (c < 0x80) return std::ispunct(static_cast<int>(c)) != 0;
  if (c >= 0x2000 && c <= 0x206f) return true;   // general punctuation
  if (c >= 0x3000 && c <= 0x303f) return true;   // CJK symbols and punctuation
  if (c >= 0xff01 && c <= 0xff0f) return true;   // fullwidth ! to /
  if (c >= 0xff1a && c <= 0xff20) return true;   // fullwidth : to @
  if (c >= 0xff3b && c <= 0xff40) return true;   // fullwidth [ to `
  if (c >= 0xff5b && c <= 0xff65) return true;   // fullwidth { to halfwidth .
  if (c == 0x00b7 || c == 0x2014 || c == 0x2026) return true;
  return false;
}

}  // namespace

ParseTree parse_bracketed(const std::string& text) {
  Cursor cur{text};
  cur.skip_space();
  if (cur.done()) throw MalformedInputError("empty input", 0);
  if (cur.peek() != '(') throw MalformedInputError("tree must start with '('", cur.pos);
  ParseTree t = parse_node(cur);
  cur.skip_space();
  if (!cur.done()) throw MalformedInputError("trailing content after tree", cur.pos);
  return t;
}

std::string render(const ParseTree& tree) {
  std::string out;
  render_into(tree, out);
  return out;
}

Sentence leaves(const ParseTree& tree) {
  Sentence s;
  collect_leaves(tree, s.tokens);
  return s;
}

std::vector<ParseTree> read_treebank_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open treebank file: " + path);
  std::vector<ParseTree> trees;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    bool blank = true;
    for (char c : line)
      if (!is_space(c)) blank = false;
    if (blank) continue;
    try {
      trees.push_back(parse_bracketed(line));
    } catch (const MalformedInputError& e) {
      throw ValidationError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return trees;
}

void write_treebank_file(const std::string& path, const std::vector<ParseTree>& trees) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write treebank file: " + path);
  for (const ParseTree& t : trees) out << render(t) << '\n';
}

const char* const kUnkClassNames[5] = {"<unk-num>", "<unk-latin>", "<unk-punct>", "<unk-long>",
                                       "<unk>"};

std::size_t utf8_length(const std::string& token) {
  std::size_t n = 0, i = 0;
  char32_t cp;
  while (i < token.size()) {
    i += utf8_decode(token, i, cp);
    ++n;
  }
  return n;
}

UnkClass classify_unk(const std::string& token) {
  bool all_digit = !token.empty();
  bool all_latin = !token.empty();
  bool all_punct = !token.empty();
  std::size_t cps = 0;
  std::size_t i = 0;
  while (i < token.size()) {
    char32_t cp;
    i += utf8_decode(token, i, cp);
    ++cps;
    all_digit = all_digit && is_digit_cp(cp);
    all_latin = all_latin && is_latin_cp(cp);
    all_punct = all_punct && is_punct_cp(cp);
  }
  if (all_digit) return UnkClass::Num;
  if (all_latin) return UnkClass::Latin;
  if (all_punct) return UnkClass::Punct;
  if (cps >= 4) return UnkClass::Long;
  return UnkClass::Other;
}

Vocabulary::Vocabulary() {
  add_token("<s>", 0);
  add_token("</s>", 0);
  for (const char* name : kUnkClassNames) add_token(name, 0);
}

TokenId Vocabulary::add_token(const std::string& token, std::int64_t frequency) {
  auto it = token_to_id_.find(token);
  if (it != token_to_id_.end()) {
    frequencies_[static_cast<std::size_t>(it->second)] += frequency;
    return it->second;
  }
  const TokenId id = static_cast<TokenId>(id_to_token_.size());
  id_to_token_.push_back(token);
  frequencies_.push_back(frequency);
  token_to_id_.emplace(token, id);
  return id;
}

TokenId Vocabulary::lookup(const std::string& token) const {
  auto it = token_to_id_.find(token);
  return it == token_to_id_.end() ? -1 : it->second;
}

TokenId Vocabulary::to_id(const std::string& token) const {
  const TokenId id = lookup(token);
  if (id >= 0) return id;
  return unk_id(classify_unk(token));
}

std::vector<TokenId> Vocabulary::to_ids(const std::vector<std::string>& tokens) const {
  std::vector<TokenId> ids;
  ids.reserve(tokens.size());
  for (const std::string& t : tokens) ids.push_back(to_id(t));
  return ids;
}

void Vocabulary::save(const std::string& path) const {
  // One "token<TAB>id" per line, reserved markers and UNK classes first.
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write vocabulary: " + path);
  for (std::size_t i = 0; i < id_to_token_.size(); ++i) {
    out << id_to_token_[i] << '\t' << i << '\n';
  }
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open vocabulary: " + path);
  Vocabulary v;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos) throw ValidationError("vocabulary line without tab: " + line);
    const std::string token = line.substr(0, tab);
    const TokenId got = static_cast<TokenId>(std::stol(line.substr(tab + 1)));
    const TokenId expect = v.lookup(token);
    if (expect >= 0) {
      if (expect != got) throw ValidationError("vocabulary id mismatch for " + token);
      continue;
    }
    const TokenId id = v.add_token(token, 0);
    if (id != got) throw ValidationError("non-contiguous vocabulary ids at " + token);
  }
  return v;
}

void Vocabulary::save_frequencies(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write vocabulary counts: " + path);
  for (std::size_t i = 0; i < id_to_token_.size(); ++i) {
    out << id_to_token_[i] << '\t' << frequencies_[i] << '\n';
  }
}

void Vocabulary::load_frequencies(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open vocabulary counts: " + path);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos) continue;
    const TokenId id = lookup(line.substr(0, tab));
    if (id >= 0) frequencies_[static_cast<std::size_t>(id)] = std::stoll(line.substr(tab + 1));
  }
}

Vocabulary build_vocabulary(const std::vector<Sentence>& corpus, std::int64_t min_count) {
  if (min_count < 1) throw std::invalid_argument("min_count must be >= 1");
  if (corpus.empty()) throw std::invalid_argument("corpus must be non-empty");
  std::unordered_map<std::string, std::int64_t> counts;
  std::vector<std::string> order;
  for (const Sentence& s : corpus) {
    for (const std::string& t : s.tokens) {
      auto [it, inserted] = counts.emplace(t, 0);
      if (inserted) order.push_back(t);
      ++it->second;
    }
  }
  Vocabulary v;
  v.set_min_count(min_count);
  for (const std::string& t : order) {
    const std::int64_t c = counts[t];
    if (c >= min_count) {
      v.add_token(t, c);
    } else {
      // rare token mass accrues to its UNK class
      v.add_token(kUnkClassNames[static_cast<int>(classify_unk(t))], c);
    }
  }
  return v;
}

TokenId unkify(const std::string& token, const Vocabulary& vocab) { return vocab.to_id(token); }

std::vector<Sentence> filter_corpus(const std::vector<Sentence>& corpus, std::size_t max_len) {
  if (max_len < 1) throw std::invalid_argument("max_len must be >= 1");
  std::vector<Sentence> out;
  out.reserve(corpus.size());
  for (const Sentence& s : corpus)
    if (s.tokens.size() <= max_len) out.push_back(s);
  return out;
}

std::vector<ParseTree> filter_treebank(const std::vector<ParseTree>& trees, std::size_t max_len) {
  if (max_len < 1) throw std::invalid_argument("max_len must be >= 1");
  std::vector<ParseTree> out;
  out.reserve(trees.size());
  for (const ParseTree& t : trees)
    if (leaves(t).tokens.size() <= max_len) out.push_back(t);
  return out;
}

CorpusStats corpus_stats(const std::vector<Sentence>& corpus, const Vocabulary& vocab) {
  CorpusStats stats;
  stats.vocab_size = vocab.size();
  for (const Sentence& s : corpus) {
    stats.token_count += static_cast<std::int64_t>(s.tokens.size());
    ++stats.sentence_length_histogram[s.tokens.size()];
  }
  return stats;
}

ParseTree unkify_tree(const ParseTree& tree, const Vocabulary& vocab) {
  if (tree.is_terminal()) {
    const TokenId id = vocab.lookup(tree.token);
    if (id >= 0) return tree;
    return ParseTree::terminal(kUnkClassNames[static_cast<int>(classify_unk(tree.token))]);
  }
  ParseTree out;
  out.label = tree.label;
  out.children.reserve(tree.children.size());
  for (const ParseTree& kid : tree.children) out.children.push_back(unkify_tree(kid, vocab));
  return out;
}

}  // namespace syneval
