#include "drift/data/manifest.hpp"

#include "drift/data/image_io.hpp"
#include "drift/errors.hpp"

#include <fmt/format.h>

#include <fstream>
#include <map>
#include <set>

namespace drift::data {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::test_id: return "test_id";
        case Split::test_ood: return "test_ood";
    }
    return "train";
}

Split parse_split(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "test_id") return Split::test_id;
    if (s == "test_ood") return Split::test_ood;
    throw ParseError(fmt::format("unknown split '{}' (expected train, test_id or test_ood)", s));
}

std::string template_caption(const std::string& class_name) { return "an image of " + class_name; }

std::vector<const ExampleRecord*> DatasetManifest::split(Split s) const {
    std::vector<const ExampleRecord*> out;
    for (const auto& r : records) {
        if (r.split == s) out.push_back(&r);
    }
    return out;
}

void DatasetManifest::validate() const {
    if (class_names.size() < 2) {
        throw ValidationError(fmt::format("manifest '{}' has {} classes; at least 2 required", name,
                                          class_names.size()));
    }
    std::set<std::string> ids;
    for (const auto& r : records) {
        if (r.id.empty()) throw ValidationError("record with empty id");
        if (!ids.insert(r.id).second) throw ValidationError(fmt::format("duplicate record id '{}'", r.id));
        if (r.label < 0 || r.label >= num_classes()) {
            throw ValidationError(fmt::format("record '{}' has label {} outside [0, {})", r.id, r.label,
                                              num_classes()));
        }
        if (r.class_name != class_names[static_cast<std::size_t>(r.label)]) {
            throw ValidationError(fmt::format("record '{}' class_name '{}' does not match label {} ('{}')",
                                              r.id, r.class_name, r.label,
                                              class_names[static_cast<std::size_t>(r.label)]));
        }
        if (r.caption.empty() && !template_fallback) {
            throw ValidationError(
                fmt::format("record '{}' has an empty caption and template fallback is disabled", r.id));
        }
        if (!r.image && r.image_path.empty()) {
            throw ValidationError(fmt::format("record '{}' has neither an image path nor inline data", r.id));
        }
    }
}

std::vector<std::string> DatasetManifest::warnings(int min_images_per_class) const {
    std::map<int, int> counts;
    for (const auto& r : records) ++counts[r.label];
    std::vector<std::string> out;
    for (int c = 0; c < num_classes(); ++c) {
        if (counts[c] < min_images_per_class) {
            out.push_back(fmt::format("class '{}' has {} images (< {})", class_names[std::size_t(c)],
                                      counts[c], min_images_per_class));
        }
    }
    return out;
}

namespace {

json record_to_json(const ExampleRecord& r, const fs::path& base) {
    json j{{"id", r.id},
           {"caption", r.caption},
           {"label", r.label},
           {"class_name", r.class_name},
           {"split", to_string(r.split)},
           {"source_dataset", r.source_dataset},
           {"caption_source", r.caption_source}};
    if (r.image) {
        j["image"] = {{"channels", r.image->channels},
                      {"height", r.image->height},
                      {"width", r.image->width},
                      {"data", r.image->pixels}};
    }
    if (!r.image_path.empty()) {
        // In memory a relative path is relative to the working directory; on
        // disk it is relative to the manifest.
        const fs::path p = fs::absolute(r.image_path).lexically_normal().lexically_relative(base);
        j["image_path"] = p.generic_string();
    }
    return j;
}

ExampleRecord record_from_json(const json& j, const fs::path& base) {
    ExampleRecord r;
    r.id = j.at("id").get<std::string>();
    r.caption = j.value("caption", "");
    r.label = j.at("label").get<int>();
    r.class_name = j.at("class_name").get<std::string>();
    r.split = parse_split(j.at("split").get<std::string>());
    r.source_dataset = j.value("source_dataset", "");
    r.caption_source = j.value("caption_source", "");
    if (j.contains("image")) {
        const auto& im = j.at("image");
        Image img(im.at("channels").get<int>(), im.at("height").get<int>(), im.at("width").get<int>());
        auto data = im.at("data").get<std::vector<float>>();
        if (data.size() != img.pixels.size()) {
            throw ValidationError(fmt::format("record '{}' inline image has {} values, expected {}", r.id,
                                              data.size(), img.pixels.size()));
        }
        img.pixels = std::move(data);
        r.image = std::move(img);
    }
    if (j.contains("image_path")) {
        fs::path p(j.at("image_path").get<std::string>());
        if (p.is_relative()) p = base / p;
        r.image_path = p.lexically_normal().string();
    }
    return r;
}

}  // namespace

void save_manifest(const DatasetManifest& manifest, const fs::path& path) {
    const fs::path base = fs::absolute(path).lexically_normal().parent_path();
    std::ofstream f(path);
    if (!f) throw IoError(fmt::format("cannot open '{}' for writing", path.string()));
    json header{{"schema_version", kManifestSchemaVersion},
                {"name", manifest.name},
                {"class_names", manifest.class_names},
                {"provenance", manifest.provenance},
                {"template_fallback", manifest.template_fallback}};
    f << header.dump() << '\n';
    for (const auto& r : manifest.records) f << record_to_json(r, base).dump() << '\n';
    if (!f) throw IoError(fmt::format("failed writing '{}'", path.string()));
}

DatasetManifest load_manifest(const fs::path& path) {
    std::ifstream f(path);
    if (!f) throw IngestionError(fmt::format("cannot open manifest '{}'", path.string()));
    const fs::path base = fs::absolute(path).lexically_normal().parent_path();

    DatasetManifest m;
    std::string line;
    int line_no = 0;
    bool have_header = false;
    while (std::getline(f, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError(fmt::format("{}:{}: {}", path.string(), line_no, e.what()));
        }
        try {
            if (!have_header) {
                const int version = j.at("schema_version").get<int>();
                if (version != kManifestSchemaVersion) {
                    throw ParseError(fmt::format("{}:{}: schema version {} (expected {})", path.string(),
                                                 line_no, version, kManifestSchemaVersion));
                }
                m.name = j.at("name").get<std::string>();
                m.class_names = j.at("class_names").get<std::vector<std::string>>();
                m.provenance = j.value("provenance", "");
                m.template_fallback = j.value("template_fallback", true);
                have_header = true;
            } else {
                m.records.push_back(record_from_json(j, base));
            }
        } catch (const json::exception& e) {
            throw ParseError(fmt::format("{}:{}: {}", path.string(), line_no, e.what()));
        } catch (const ParseError& e) {
            if (std::string(e.what()).rfind(path.string(), 0) == 0) throw;
            throw ParseError(fmt::format("{}:{}: {}", path.string(), line_no, e.what()));
        }
    }
    if (!have_header) throw ParseError(fmt::format("{}: missing header line", path.string()));

    m.validate();
    std::vector<std::string> missing;
    for (const auto& r : m.records) {
        if (!r.image && !fs::exists(r.image_path)) missing.push_back(r.image_path);
    }
    if (!missing.empty()) {
        std::string list;
        for (const auto& p : missing) list += "\n  " + p;
        throw IngestionError(fmt::format("{} image file(s) not found:{}", missing.size(), list));
    }
    return m;
}

Image load_record_image(const ExampleRecord& record) {
    if (record.image) return *record.image;
    return read_pnm(record.image_path);
}

}  // namespace drift::data
