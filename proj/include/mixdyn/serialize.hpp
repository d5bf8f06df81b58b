#pragma once

#include "mixdyn/havok.hpp"
#include "mixdyn/mixed.hpp"
#include "mixdyn/sindy.hpp"

#include "json.hpp"

#include <filesystem>

namespace mixdyn {

nlohmann::json to_json(const LibrarySpec& spec);
nlohmann::json to_json(const SparseModel& model);
nlohmann::json to_json(const DelayPairModel& model);
nlohmann::json to_json(const HavokModel& model);
nlohmann::json to_json(const MixedModel& model);

LibrarySpec library_from_json(const nlohmann::json& doc);
SparseModel sparse_model_from_json(const nlohmann::json& doc);

/// Pretty-printed with sorted keys so identical models give identical bytes.
void write_json(const std::filesystem::path& path, const nlohmann::json& doc);
nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace mixdyn
