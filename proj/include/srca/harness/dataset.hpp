#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "srca/core/types.hpp"
#include "srca/error.hpp"

namespace srca {

struct Dataset {
  std::string name;
  std::vector<Question> questions;
};

namespace detail {

inline std::string dataset_field(const nlohmann::json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw LoadError(where + ": missing field " + key);
  const auto& v = j[key];
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number()) return v.dump();
  throw LoadError(where + ": field " + key + " must be a string");
}

/// Ids become file names in the results store.
inline bool safe_id(const std::string& id) {
  if (id.empty() || id == "." || id == "..") return false;
  for (char c : id) {
    if (c == '/' || c == '\\' || c == '\0') return false;
  }
  return true;
}

}  // namespace detail

/// JSON-lines file of {id, question, answer}; the dataset is named after the file stem.
inline Dataset load_dataset(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw LoadError("cannot open dataset " + file.string());
  Dataset ds;
  ds.name = file.stem().string();
  std::unordered_set<std::string> seen;
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = file.filename().string() + ":" + std::to_string(line_no);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw LoadError(where + ": " + e.what());
    }
    if (!j.is_object()) throw LoadError(where + ": expected a JSON object");
    Question q{detail::dataset_field(j, "id", where), detail::dataset_field(j, "question", where),
               detail::dataset_field(j, "answer", where)};
    if (!detail::safe_id(q.id)) throw LoadError(where + ": id '" + q.id + "' cannot be used as a file name");
    if (!seen.insert(q.id).second) throw LoadError(where + ": duplicate id '" + q.id + "'");
    ds.questions.push_back(std::move(q));
  }
  if (ds.questions.empty()) throw LoadError(file.string() + ": dataset is empty");
  return ds;
}

}  // namespace srca
