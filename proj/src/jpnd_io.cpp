#include "squeezelab/jpnd_io.hpp"

#include <fstream>
#include <sstream>

#include "squeezelab/error.hpp"
#include "squeezelab/format.hpp"

namespace squeezelab {

namespace {
constexpr const char* kFormat = "jpnd-v1";
}

nlohmann::json to_json(const JointDist& j) {
  nlohmann::json doc;
  doc["format"] = kFormat;
  doc["dim_s"] = j.dim_s();
  doc["dim_i"] = j.dim_i();
  if (j.has_counts()) {
    doc["counts"] = std::vector<std::uint64_t>(j.counts().begin(), j.counts().end());
  } else {
    doc["probs"] = std::vector<double>(j.probs().begin(), j.probs().end());
  }
  if (j.n_events()) doc["n_events"] = *j.n_events();
  doc["truncated_mass"] = j.truncated_mass();
  return doc;
}

JointDist joint_from_json(const nlohmann::json& doc) {
  try {
    require(doc.value("format", "") == kFormat, ErrorKind::InvalidData,
            "not a jpnd-v1 document");
    const auto dim_s = doc.at("dim_s").get<std::size_t>();
    const auto dim_i = doc.at("dim_i").get<std::size_t>();
    if (doc.contains("counts")) {
      require(doc.contains("n_events"), ErrorKind::InvalidData,
              "counts variant requires n_events");
      return JointDist::from_counts(dim_s, dim_i, doc.at("counts").get<std::vector<std::uint64_t>>(),
                                    doc.at("n_events").get<std::uint64_t>());
    }
    const auto probs = doc.at("probs").get<std::vector<double>>();
    require(probs.size() == dim_s * dim_i, ErrorKind::DimMismatch,
            "probs length does not match dim_s * dim_i");
    JointDist j(dim_s, dim_i);
    std::copy(probs.begin(), probs.end(), j.probs().begin());
    j.set_truncated_mass(doc.value("truncated_mass", 0.0));
    if (doc.contains("n_events")) j.set_n_events(doc.at("n_events").get<std::uint64_t>());
    j.validate(1e-9);
    return j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidData, std::string("malformed jpnd-v1 document: ") + e.what());
  }
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

void write_jpnd(const std::filesystem::path& path, const JointDist& j) {
  write_text(path, dump_json(to_json(j)) + "\n");
}

JointDist read_jpnd(const std::filesystem::path& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::InvalidData, path.string() + ": " + e.what());
  }
  return joint_from_json(doc);
}

}  // namespace squeezelab
