#pragma once

#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>

#include "dpv/petri.hpp"
#include "dpv/util.hpp"
#include "dpv/xml.hpp"

namespace dpv {

// PNML with an initial marking per place and the final marking in a
// <finalmarkings> section. Silent transitions carry no <name> element.
inline void write_pnml(std::ostream& out, const PetriNet& net, const std::string& net_id = "net1") {
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out << "<pnml>\n";
  out << "  <net id=\"" << xml::escape(net_id)
      << "\" type=\"http://www.pnml.org/version-2009/grammar/ptnet\">\n";
  out << "    <page id=\"page1\">\n";
  for (int p = 0; p < net.num_places; ++p) {
    out << "      <place id=\"p" << p << "\">";
    if (net.initial[static_cast<std::size_t>(p)] > 0)
      out << "<initialMarking><text>" << net.initial[static_cast<std::size_t>(p)]
          << "</text></initialMarking>";
    out << "</place>\n";
  }
  for (std::size_t t = 0; t < net.transitions.size(); ++t) {
    out << "      <transition id=\"t" << t << "\">";
    if (!net.transitions[t].label.empty())
      out << "<name><text>" << xml::escape(net.transitions[t].label) << "</text></name>";
    out << "</transition>\n";
  }
  std::size_t arc = 0;
  for (std::size_t t = 0; t < net.transitions.size(); ++t) {
    for (int p : net.transitions[t].pre)
      out << "      <arc id=\"a" << arc++ << "\" source=\"p" << p << "\" target=\"t" << t
          << "\"/>\n";
    for (int p : net.transitions[t].post)
      out << "      <arc id=\"a" << arc++ << "\" source=\"t" << t << "\" target=\"p" << p
          << "\"/>\n";
  }
  out << "    </page>\n";
  out << "    <finalmarkings>\n      <marking>\n";
  for (int p = 0; p < net.num_places; ++p)
    if (net.final[static_cast<std::size_t>(p)] > 0)
      out << "        <place idref=\"p" << p << "\"><text>"
          << net.final[static_cast<std::size_t>(p)] << "</text></place>\n";
  out << "      </marking>\n    </finalmarkings>\n";
  out << "  </net>\n</pnml>\n";
}

inline void write_pnml_file(const std::string& path, const PetriNet& net,
                            const std::string& net_id = "net1") {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path + "'");
  write_pnml(out, net, net_id);
}

inline PetriNet read_pnml(const std::string& content) {
  xml::Node root = xml::parse(content);
  if (root.name != "pnml") throw InputError("pnml: root element is <" + root.name + ">");
  const xml::Node* net_node = root.child("net");
  if (!net_node) throw InputError("pnml: missing <net>");

  // collect elements from the net and any pages below it
  std::vector<const xml::Node*> scopes{net_node};
  for (const auto* page : net_node->all("page")) scopes.push_back(page);

  PetriNet net;
  std::map<std::string, int> place_ids;
  std::map<std::string, int> transition_ids;
  for (const auto* scope : scopes) {
    for (const auto* pl : scope->all("place")) {
      const std::string id = pl->attr("id");
      if (id.empty()) throw InputError("pnml: place without id");
      place_ids[id] = net.num_places++;
      int tokens = 0;
      if (const auto* im = pl->child("initialMarking"))
        if (const auto* text = im->child("text")) tokens = std::stoi(text->text);
      net.initial.push_back(tokens);
      net.final.push_back(0);
    }
    for (const auto* tr : scope->all("transition")) {
      const std::string id = tr->attr("id");
      if (id.empty()) throw InputError("pnml: transition without id");
      std::string label;
      if (const auto* name = tr->child("name"))
        if (const auto* text = name->child("text")) label = text->text;
      if (label == "tau" || label == "$invisible$") label.clear();
      transition_ids[id] = static_cast<int>(net.transitions.size());
      net.transitions.push_back({label, {}, {}});
    }
  }
  for (const auto* scope : scopes) {
    for (const auto* arc : scope->all("arc")) {
      const std::string src = arc->attr("source");
      const std::string dst = arc->attr("target");
      if (place_ids.count(src) && transition_ids.count(dst)) {
        net.transitions[static_cast<std::size_t>(transition_ids[dst])].pre.push_back(
            place_ids[src]);
      } else if (transition_ids.count(src) && place_ids.count(dst)) {
        net.transitions[static_cast<std::size_t>(transition_ids[src])].post.push_back(
            place_ids[dst]);
      } else {
        throw InputError("pnml: arc " + arc->attr("id") +
                         " does not connect a place with a transition");
      }
    }
  }
  bool final_seen = false;
  if (const auto* fms = net_node->child("finalmarkings")) {
    if (const auto* marking = fms->child("marking")) {
      for (const auto* pl : marking->all("place")) {
        const std::string ref = pl->attr("idref");
        if (!place_ids.count(ref)) throw InputError("pnml: finalmarkings references '" + ref + "'");
        int tokens = 1;
        if (const auto* text = pl->child("text")) tokens = std::stoi(text->text);
        net.final[static_cast<std::size_t>(place_ids[ref])] = tokens;
        final_seen = true;
      }
    }
  }
  if (!final_seen) {
    // fall back to the conventional sink: places without outgoing arcs
    std::vector<bool> has_out(static_cast<std::size_t>(net.num_places), false);
    for (const auto& t : net.transitions)
      for (int p : t.pre) has_out[static_cast<std::size_t>(p)] = true;
    for (int p = 0; p < net.num_places; ++p)
      if (!has_out[static_cast<std::size_t>(p)]) net.final[static_cast<std::size_t>(p)] = 1;
  }
  return net;
}

inline PetriNet read_pnml_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return read_pnml(buf.str());
}

inline void write_dot(std::ostream& out, const PetriNet& net) {
  out << "digraph petrinet {\n  rankdir=LR;\n";
  for (int p = 0; p < net.num_places; ++p) {
    out << "  p" << p << " [shape=circle,label=\"\"";
    if (net.initial[static_cast<std::size_t>(p)] > 0) out << ",penwidth=3";
    if (net.final[static_cast<std::size_t>(p)] > 0) out << ",peripheries=2";
    out << "];\n";
  }
  for (std::size_t t = 0; t < net.transitions.size(); ++t) {
    const auto& label = net.transitions[t].label;
    out << "  t" << t << " [shape=box,label=\"" << (label.empty() ? "" : label) << "\""
        << (label.empty() ? ",style=filled,fillcolor=black,height=0.1" : "") << "];\n";
  }
  for (std::size_t t = 0; t < net.transitions.size(); ++t) {
    for (int p : net.transitions[t].pre) out << "  p" << p << " -> t" << t << ";\n";
    for (int p : net.transitions[t].post) out << "  t" << t << " -> p" << p << ";\n";
  }
  out << "}\n";
}

}  // namespace dpv
