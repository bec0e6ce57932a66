#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "dpv/util.hpp"

namespace dpv::xml {

// Small recursive-descent XML reader covering the subset needed by the XES
// and PNML loaders: elements, attributes, character data, comments, CDATA,
// processing instructions and the five predefined entities. No DTDs, no
// namespaces resolution (prefixes are kept verbatim in names).
struct Node {
  std::string name;
  std::map<std::string, std::string> attrs;
  std::vector<Node> children;
  std::string text;  // concatenated character data of this element

  const Node* child(const std::string& n) const {
    for (const auto& c : children)
      if (c.name == n) return &c;
    return nullptr;
  }
  std::vector<const Node*> all(const std::string& n) const {
    std::vector<const Node*> out;
    for (const auto& c : children)
      if (c.name == n) out.push_back(&c);
    return out;
  }
  std::string attr(const std::string& k, const std::string& dflt = "") const {
    auto it = attrs.find(k);
    return it == attrs.end() ? dflt : it->second;
  }
};

class Parser {
 public:
  explicit Parser(const std::string& input) : s_(input) {}

  Node parse() {
    skip_misc();
    Node root = element();
    skip_misc();
    if (pos_ != s_.size()) fail("trailing content after document element");
    return root;
  }

 private:
  const std::string& s_;
  std::size_t pos_ = 0;

  [[noreturn]] void fail(const std::string& msg) const {
    long line = 1;
    for (std::size_t i = 0; i < pos_ && i < s_.size(); ++i)
      if (s_[i] == '\n') ++line;
    throw InputError("xml: " + msg + " (line " + std::to_string(line) + ")");
  }

  bool eof() const { return pos_ >= s_.size(); }
  char peek() const { return eof() ? '\0' : s_[pos_]; }
  char get() {
    if (eof()) fail("unexpected end of input");
    return s_[pos_++];
  }
  bool starts_with(const char* p) const { return s_.compare(pos_, std::string::traits_type::length(p), p) == 0; }
  void expect(char c) {
    if (get() != c) fail(std::string("expected '") + c + "'");
  }
  static bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; }
  void skip_ws() {
    while (!eof() && is_space(peek())) ++pos_;
  }

  void skip_until(const char* end) {
    auto p = s_.find(end, pos_);
    if (p == std::string::npos) fail("unterminated markup");
    pos_ = p + std::string::traits_type::length(end);
  }

  // Whitespace, comments, PIs and the XML declaration between elements.
  void skip_misc() {
    while (true) {
      skip_ws();
      if (starts_with("<!--")) {
        pos_ += 4;
        skip_until("-->");
      } else if (starts_with("<?")) {
        pos_ += 2;
        skip_until("?>");
      } else if (starts_with("<!DOCTYPE")) {
        skip_until(">");
      } else {
        return;
      }
    }
  }

  static bool is_name_char(char c) {
    return !is_space(c) && c != '>' && c != '/' && c != '=' && c != '<' && c != '\0';
  }

  std::string name_token() {
    std::string n;
    while (!eof() && is_name_char(peek())) n.push_back(get());
    if (n.empty()) fail("expected a name");
    return n;
  }

  std::string decode(const std::string& raw) {
    std::string out;
    out.reserve(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
      if (raw[i] != '&') {
        out.push_back(raw[i]);
        continue;
      }
      auto semi = raw.find(';', i);
      if (semi == std::string::npos) fail("bad entity reference");
      std::string ent = raw.substr(i + 1, semi - i - 1);
      if (ent == "amp") out.push_back('&');
      else if (ent == "lt") out.push_back('<');
      else if (ent == "gt") out.push_back('>');
      else if (ent == "quot") out.push_back('"');
      else if (ent == "apos") out.push_back('\'');
      else if (!ent.empty() && ent[0] == '#') {
        long code = std::stol(ent.substr(ent[1] == 'x' || ent[1] == 'X' ? 2 : 1), nullptr,
                              ent[1] == 'x' || ent[1] == 'X' ? 16 : 10);
        if (code < 0x80) out.push_back(static_cast<char>(code));
        else out += "?";  // non-ASCII references are not needed by the supported formats
      } else {
        fail("unknown entity &" + ent + ";");
      }
      i = semi;
    }
    return out;
  }

  Node element() {
    expect('<');
    Node node;
    node.name = name_token();
    while (true) {
      skip_ws();
      if (peek() == '/') {
        ++pos_;
        expect('>');
        return node;  // self-closing
      }
      if (peek() == '>') {
        ++pos_;
        break;
      }
      std::string key = name_token();
      skip_ws();
      expect('=');
      skip_ws();
      char q = get();
      if (q != '"' && q != '\'') fail("attribute value must be quoted");
      auto end = s_.find(q, pos_);
      if (end == std::string::npos) fail("unterminated attribute value");
      node.attrs[key] = decode(s_.substr(pos_, end - pos_));
      pos_ = end + 1;
    }
    // content
    while (true) {
      if (eof()) fail("missing closing tag for <" + node.name + ">");
      if (starts_with("<!--")) {
        pos_ += 4;
        skip_until("-->");
      } else if (starts_with("<![CDATA[")) {
        pos_ += 9;
        auto end = s_.find("]]>", pos_);
        if (end == std::string::npos) fail("unterminated CDATA");
        node.text += s_.substr(pos_, end - pos_);
        pos_ = end + 3;
      } else if (starts_with("<?")) {
        pos_ += 2;
        skip_until("?>");
      } else if (starts_with("</")) {
        pos_ += 2;
        std::string closing = name_token();
        if (closing != node.name) fail("mismatched </" + closing + ">, expected </" + node.name + ">");
        skip_ws();
        expect('>');
        return node;
      } else if (peek() == '<') {
        node.children.push_back(element());
      } else {
        std::string chunk;
        while (!eof() && peek() != '<') chunk.push_back(get());
        node.text += decode(chunk);
      }
    }
  }
};

inline Node parse(const std::string& input) { return Parser(input).parse(); }

inline std::string escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

}  // namespace dpv::xml
