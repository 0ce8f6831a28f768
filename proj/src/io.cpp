#include "fpp/io.hpp"

#include <stdexcept>

namespace fpp {

namespace {

std::string strip(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c != ' ' && c != '\t' && c != '\r' && c != '\n') out.push_back(c);
  }
  return out;
}

std::vector<Rational> rationals(const nlohmann::json& j, const char* what) {
  if (!j.is_array()) throw std::invalid_argument(std::string(what) + ": expected an array");
  std::vector<Rational> out;
  for (const auto& x : j) {
    if (x.is_string()) {
      out.push_back(parse_rational(x.get<std::string>()));
    } else if (x.is_number_integer()) {
      out.push_back(Rational(x.get<long long>()));
    } else {
      throw std::invalid_argument(std::string(what) + ": coordinates must be strings \"p/q\" or integers");
    }
  }
  return out;
}

nlohmann::json rational_array(const std::vector<Rational>& v) {
  nlohmann::json a = nlohmann::json::array();
  for (const Rational& q : v) a.push_back(to_string(q));
  return a;
}

std::vector<double> numbers(const nlohmann::json& j, const char* what) {
  if (!j.is_array()) throw std::invalid_argument(std::string(what) + ": expected an array");
  std::vector<double> out;
  for (const auto& x : j) {
    if (x.is_number()) {
      out.push_back(x.get<double>());
    } else if (x.is_string()) {
      out.push_back(parse_scalar<double>(x.get<std::string>()));
    } else {
      throw std::invalid_argument(std::string(what) + ": expected numbers");
    }
  }
  return out;
}

}  // namespace

RBox parse_box(const std::string& raw) {
  const std::string text = strip(raw);
  RBox b;
  size_t pos = 0;
  while (pos < text.size()) {
    char open = text[pos];
    if (open != '[' && open != '{') throw std::invalid_argument("box '" + raw + "': expected '[' or '{'");
    char close = open == '[' ? ']' : '}';
    size_t end = text.find(close, pos);
    if (end == std::string::npos) throw std::invalid_argument("box '" + raw + "': unbalanced bracket");
    std::string inner = text.substr(pos + 1, end - pos - 1);
    if (open == '{') {
      Rational a = parse_rational(inner);
      b.lo.push_back(a);
      b.hi.push_back(a);
    } else {
      size_t comma = inner.find(',');
      if (comma == std::string::npos) throw std::invalid_argument("box '" + raw + "': interval needs 'lo,hi'");
      b.lo.push_back(parse_rational(inner.substr(0, comma)));
      b.hi.push_back(parse_rational(inner.substr(comma + 1)));
      if (b.hi.back() < b.lo.back()) throw std::invalid_argument("box '" + raw + "': hi < lo");
    }
    pos = end + 1;
    if (pos < text.size()) {
      if (text[pos] != 'x' && text[pos] != 'X') throw std::invalid_argument("box '" + raw + "': expected 'x' between intervals");
      ++pos;
    }
  }
  if (b.lo.empty()) throw std::invalid_argument("box: empty text");
  if (b.dim() > kMaxDim) throw std::invalid_argument("box '" + raw + "': dimension exceeds " + std::to_string(kMaxDim));
  return b;
}

std::vector<RBox> parse_boxes(const std::string& text) {
  std::vector<RBox> out;
  size_t start = 0;
  while (start <= text.size()) {
    size_t semi = text.find(';', start);
    std::string part = text.substr(start, semi == std::string::npos ? std::string::npos : semi - start);
    if (!strip(part).empty()) out.push_back(parse_box(part));
    if (semi == std::string::npos) break;
    start = semi + 1;
  }
  return out;
}

std::string format_box(const RBox& b) {
  std::string s;
  for (int j = 0; j < b.dim(); ++j) {
    if (j) s += "x";
    if (b.lo[j] == b.hi[j]) {
      s += "{" + to_string(b.lo[j]) + "}";
    } else {
      s += "[" + to_string(b.lo[j]) + "," + to_string(b.hi[j]) + "]";
    }
  }
  return s;
}

nlohmann::json measure_to_json(const VectorMeasure& m) {
  nlohmann::json j;
  j["d"] = m.d;
  j["atoms"] = nlohmann::json::array();
  for (const Atom& a : m.atoms) j["atoms"].push_back({{"point", rational_array(a.point)}, {"weight", a.weight}});
  j["densities"] = nlohmann::json::array();
  for (const DensityBox& db : m.densities) {
    j["densities"].push_back({{"lo", rational_array(db.box.lo)}, {"hi", rational_array(db.box.hi)}, {"value", db.value}});
  }
  return j;
}

VectorMeasure measure_from_json(const nlohmann::json& j) {
  VectorMeasure m;
  if (!j.contains("d")) throw std::invalid_argument("measure: missing 'd'");
  m.d = j.at("d").get<int>();
  if (j.contains("atoms")) {
    for (const auto& a : j.at("atoms")) m.atoms.push_back(Atom{rationals(a.at("point"), "atom point"), numbers(a.at("weight"), "atom weight")});
  }
  if (j.contains("densities")) {
    for (const auto& db : j.at("densities")) {
      m.densities.push_back(DensityBox{make_box(rationals(db.at("lo"), "density lo"), rationals(db.at("hi"), "density hi")),
                                       numbers(db.at("value"), "density value")});
    }
  }
  m.validate();
  return m;
}

nlohmann::json field_to_json(const ContinuousField& f) {
  nlohmann::json j;
  j["d"] = f.d;
  j["M"] = to_string(f.M);
  j["cells"] = nlohmann::json::array();
  for (const FieldCell& c : f.cells) {
    j["cells"].push_back({{"lo", rational_array(c.box.lo)}, {"hi", rational_array(c.box.hi)}, {"value", rational_array(c.value)}});
  }
  return j;
}

ContinuousField field_from_json(const nlohmann::json& j) {
  ContinuousField f;
  f.d = j.at("d").get<int>();
  if (j.contains("M")) f.M = j.at("M").is_string() ? parse_rational(j.at("M").get<std::string>()) : Rational(j.at("M").get<long long>());
  for (const auto& c : j.at("cells")) {
    f.cells.push_back(FieldCell{make_box(rationals(c.at("lo"), "cell lo"), rationals(c.at("hi"), "cell hi")),
                                rationals(c.at("value"), "cell value")});
  }
  f.validate();
  return f;
}

}  // namespace fpp
