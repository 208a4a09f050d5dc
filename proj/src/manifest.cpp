#include "lake/manifest.hpp"

#include "lake/error.hpp"
#include "lake/npy.hpp"

#include <json.hpp>

#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>

namespace lake {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

void require_keys(const json& object, const std::string& where, std::initializer_list<const char*> required,
                  std::initializer_list<const char*> optional = {}) {
    if (!object.is_object()) throw SchemaError(where + ": expected a JSON object");
    for (const char* key : required) {
        if (!object.contains(key)) throw SchemaError(where + ": missing field '" + key + "'");
    }
    for (const auto& [key, value] : object.items()) {
        bool known = false;
        for (const char* k : required) known = known || key == k;
        for (const char* k : optional) known = known || key == k;
        if (!known) throw SchemaError(where + ": unknown field '" + key + "'");
    }
}

std::string get_string(const json& object, const char* key, const std::string& where) {
    const json& value = object.at(key);
    if (!value.is_string()) throw SchemaError(where + "." + key + ": expected a string");
    return value.get<std::string>();
}

std::int64_t get_int(const json& value, const std::string& where) {
    if (!value.is_number_integer()) throw SchemaError(where + ": expected an integer");
    return value.get<std::int64_t>();
}

std::pair<std::int64_t, std::int64_t> get_pair(const json& object, const char* key, const std::string& where) {
    const json& value = object.at(key);
    const std::string field = where + "." + key;
    if (!value.is_array() || value.size() != 2) throw SchemaError(field + ": expected a 2-element array");
    return {get_int(value[0], field + "[0]"), get_int(value[1], field + "[1]")};
}

fs::path resolve(const fs::path& root, const std::string& relative) { return (root / relative).lexically_normal(); }

void check_file(const fs::path& path, const std::string& entry) {
    if (!fs::is_regular_file(path)) throw ValidationError(entry + ": referenced file " + path.string() + " does not exist");
}

void check_npy(const fs::path& path, const std::string& entry, npy::DType dtype,
               std::initializer_list<Index> shape) {
    check_file(path, entry);
    npy::Header header;
    try {
        header = npy::read_header(path);
    } catch (const Error& e) {
        throw ValidationError(entry + ": " + e.what());
    }
    std::vector<std::size_t> expected;
    for (Index d : shape) expected.push_back(static_cast<std::size_t>(d));
    if (header.dtype != dtype || header.shape != expected) {
        std::ostringstream msg;
        msg << entry << ": " << path.string() << " has dtype " << npy::descr(header.dtype) << " shape (";
        for (std::size_t i = 0; i < header.shape.size(); ++i) msg << (i ? ", " : "") << header.shape[i];
        msg << "), expected " << npy::descr(dtype) << " shape (";
        for (std::size_t i = 0; i < expected.size(); ++i) msg << (i ? ", " : "") << expected[i];
        msg << ")";
        throw ValidationError(msg.str());
    }
}

void check_id(const std::string& id, const std::string& where, std::set<std::string>& seen) {
    if (id.empty() || id.find_first_of("/\\") != std::string::npos || id == "." || id == "..") {
        throw ValidationError(where + ": id '" + id + "' is not a valid file stem");
    }
    if (!seen.insert(id).second) throw ValidationError(where + ": duplicate id '" + id + "'");
}

}  // namespace

DatasetManifest parse_manifest(const std::string& json_text, const fs::path& root) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw SchemaError(std::string("manifest is not valid JSON: ") + e.what());
    }
    require_keys(doc, "manifest", {"category", "image_size", "grid", "dims", "layers", "support", "test", "text"});

    DatasetManifest m;
    m.root = root;
    m.category = get_string(doc, "category", "manifest");
    const auto [height, width] = get_pair(doc, "image_size", "manifest");
    const auto [grid_rows, grid_cols] = get_pair(doc, "grid", "manifest");
    const auto [dim, text_dim] = get_pair(doc, "dims", "manifest");
    const auto [layer, layer_lp] = get_pair(doc, "layers", "manifest");
    if (height < 1 || width < 1) throw ValidationError("manifest.image_size: dimensions must be positive");
    if (grid_rows < 1 || grid_cols < 1) throw ValidationError("manifest.grid: dimensions must be positive");
    if (dim < 1 || text_dim < 1) throw ValidationError("manifest.dims: dimensions must be positive");
    m.image_size = {height, width};
    m.grid = {grid_rows, grid_cols};
    m.dim = dim;
    m.text_dim = text_dim;
    m.layer = static_cast<int>(layer);
    m.layer_lp = static_cast<int>(layer_lp);
    const Index tokens = m.grid.size();

    const json& support = doc.at("support");
    if (!support.is_array()) throw SchemaError("manifest.support: expected an array");
    if (support.empty()) throw ValidationError("manifest.support: at least one support image is required");
    std::set<std::string> support_ids;
    for (std::size_t i = 0; i < support.size(); ++i) {
        const std::string where = "support[" + std::to_string(i) + "]";
        require_keys(support[i], where, {"id", "features"});
        SupportEntry entry;
        entry.id = get_string(support[i], "id", where);
        check_id(entry.id, where, support_ids);
        entry.features = resolve(root, get_string(support[i], "features", where));
        check_npy(entry.features, where + " (" + entry.id + ")", npy::DType::Float32, {tokens, m.dim});
        m.support.push_back(std::move(entry));
    }

    const json& test = doc.at("test");
    if (!test.is_array()) throw SchemaError("manifest.test: expected an array");
    std::set<std::string> test_ids;
    for (std::size_t i = 0; i < test.size(); ++i) {
        const std::string where = "test[" + std::to_string(i) + "]";
        require_keys(test[i], where, {"id", "features", "features_lp", "label"}, {"mask"});
        TestEntry entry;
        entry.id = get_string(test[i], "id", where);
        check_id(entry.id, where, test_ids);
        const std::string tag = where + " (" + entry.id + ")";
        const std::int64_t label = get_int(test[i].at("label"), where + ".label");
        if (label != 0 && label != 1) throw ValidationError(tag + ": label must be 0 or 1");
        entry.label = static_cast<int>(label);
        entry.features = resolve(root, get_string(test[i], "features", where));
        entry.features_lp = resolve(root, get_string(test[i], "features_lp", where));
        check_npy(entry.features, tag, npy::DType::Float32, {tokens, m.dim});
        check_npy(entry.features_lp, tag, npy::DType::Float32, {tokens, m.text_dim});
        if (test[i].contains("mask") && !test[i].at("mask").is_null()) {
            entry.mask = resolve(root, get_string(test[i], "mask", where));
            check_npy(*entry.mask, tag, npy::DType::UInt8, {m.image_size.height, m.image_size.width});
        }
        m.test.push_back(std::move(entry));
    }

    const json& text = doc.at("text");
    require_keys(text, "manifest.text", {"t_norm", "t_anom", "templates"});
    m.text.t_norm = resolve(root, get_string(text, "t_norm", "manifest.text"));
    m.text.t_anom = resolve(root, get_string(text, "t_anom", "manifest.text"));
    check_npy(m.text.t_norm, "text.t_norm", npy::DType::Float32, {m.text_dim});
    check_npy(m.text.t_anom, "text.t_anom", npy::DType::Float32, {m.text_dim});
    const json& templates = text.at("templates");
    require_keys(templates, "manifest.text.templates", {"normal", "anomalous"});
    m.text.template_normal = get_string(templates, "normal", "manifest.text.templates");
    m.text.template_anomalous = get_string(templates, "anomalous", "manifest.text.templates");
    return m;
}

DatasetManifest load_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open manifest " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    fs::path root = path.parent_path();
    if (root.empty()) root = ".";
    return parse_manifest(buffer.str(), root);
}

void save_manifest(const DatasetManifest& m, const fs::path& path) {
    auto rel = [&](const fs::path& p) { return p.lexically_relative(m.root).generic_string(); };
    json doc;
    doc["category"] = m.category;
    doc["image_size"] = {m.image_size.height, m.image_size.width};
    doc["grid"] = {m.grid.rows, m.grid.cols};
    doc["dims"] = {m.dim, m.text_dim};
    doc["layers"] = {m.layer, m.layer_lp};
    doc["support"] = json::array();
    for (const auto& s : m.support) doc["support"].push_back({{"id", s.id}, {"features", rel(s.features)}});
    doc["test"] = json::array();
    for (const auto& t : m.test) {
        json entry = {{"id", t.id},
                      {"features", rel(t.features)},
                      {"features_lp", rel(t.features_lp)},
                      {"label", t.label}};
        if (t.mask) entry["mask"] = rel(*t.mask);
        doc["test"].push_back(std::move(entry));
    }
    doc["text"] = {{"t_norm", rel(m.text.t_norm)},
                   {"t_anom", rel(m.text.t_anom)},
                   {"templates", {{"normal", m.text.template_normal}, {"anomalous", m.text.template_anomalous}}}};
    std::ofstream out(path);
    if (!out) throw IoError("cannot write manifest " + path.string());
    out << doc.dump(2) << '\n';
}

}  // namespace lake
