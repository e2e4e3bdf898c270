#pragma once

// Graph description documents as JSON text:
//   {"lattice":[[re,im],[re,im]],
//    "vertices":[{"id":int,"pos":[re,im],"color":"B"|"W"|null}],
//    "edges":[{"u":int,"v":int,"du":int,"dv":int}]}
// write(read(doc)) reproduces every numeric field bit-exactly (shortest
// round-trip double formatting).

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "isoradial/lattice.hpp"

namespace isoradial {

inline GraphDoc doc_from_json(const nlohmann::json& j) {
  GraphDoc d;
  try {
    auto lam = j.at("lattice");
    if (!lam.is_array() || lam.size() != 2) throw ParseError("lattice must hold two vectors");
    d.lambda1 = Complex(lam[0].at(0).get<double>(), lam[0].at(1).get<double>());
    d.lambda2 = Complex(lam[1].at(0).get<double>(), lam[1].at(1).get<double>());
    for (const auto& jv : j.at("vertices")) {
      DocVertex v;
      v.id = jv.at("id").get<int>();
      v.pos = Complex(jv.at("pos").at(0).get<double>(), jv.at("pos").at(1).get<double>());
      if (jv.contains("color") && !jv.at("color").is_null()) {
        std::string c = jv.at("color").get<std::string>();
        if (c == "B") v.color = Color::black;
        else if (c == "W") v.color = Color::white;
        else throw ParseError("color must be \"B\", \"W\" or null");
      }
      d.vertices.push_back(v);
    }
    for (const auto& je : j.at("edges")) {
      DocEdge e;
      e.u = je.at("u").get<int>();
      e.v = je.at("v").get<int>();
      e.du = je.at("du").get<int>();
      e.dv = je.at("dv").get<int>();
      d.edges.push_back(e);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(e.what());
  }
  return d;
}

inline GraphDoc read_graph_doc(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(e.what());
  }
  return doc_from_json(j);
}

inline nlohmann::json doc_to_json(const GraphDoc& d) {
  nlohmann::json j;
  j["lattice"] = {{d.lambda1.real(), d.lambda1.imag()},
                  {d.lambda2.real(), d.lambda2.imag()}};
  j["vertices"] = nlohmann::json::array();
  for (const DocVertex& v : d.vertices) {
    nlohmann::json jv;
    jv["id"] = v.id;
    jv["pos"] = {v.pos.real(), v.pos.imag()};
    if (v.color == Color::black) jv["color"] = "B";
    else if (v.color == Color::white) jv["color"] = "W";
    else jv["color"] = nullptr;
    j["vertices"].push_back(jv);
  }
  j["edges"] = nlohmann::json::array();
  for (const DocEdge& e : d.edges) {
    j["edges"].push_back({{"u", e.u}, {"v", e.v}, {"du", e.du}, {"dv", e.dv}});
  }
  return j;
}

inline std::string write_graph_doc(const GraphDoc& d) { return doc_to_json(d).dump(2); }

inline GraphDoc doc_of(const IsoradialGraph& g) {
  GraphDoc d;
  d.lambda1 = g.lambda1;
  d.lambda2 = g.lambda2;
  d.vertices = g.vertices;
  for (const EdgeClass& e : g.edges) d.edges.push_back({e.u, e.v, e.du, e.dv});
  return d;
}

inline GraphDoc load_graph_doc(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IOError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return read_graph_doc(ss.str());
}

}  // namespace isoradial
