#include "disque/manifest.hpp"

#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "disque/image_io.hpp"

namespace disque {

Manifest Manifest::load(const std::string& path, bool validate_decode) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorClass::Data, "cannot open manifest: " + path);
    Manifest m;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const std::exception& e) {
            throw Error(ErrorClass::Data, "manifest line " + std::to_string(lineno) +
                                              ": " + e.what());
        }
        ManifestEntry e;
        e.path = j.at("path").get<std::string>();
        e.colorspace = colorspace_from_string(j.value("colorspace", std::string("srgb")));
        e.split = j.value("split", std::string("train"));
        if (e.colorspace == Colorspace::PQ_BT2100) m.bank_domain = BankDomain::HDR;
        m.entries.push_back(std::move(e));
    }
    if (m.entries.size() < 2)
        throw Error(ErrorClass::Data, "manifest needs at least 2 entries");
    if (validate_decode) {
        for (const auto& e : m.entries) {
            if (!std::filesystem::exists(e.path))
                throw Error(ErrorClass::Data, "manifest path missing: " + e.path);
            load_image(e.path, e.colorspace);  // throws on decode failure
        }
    }
    return m;
}

void Manifest::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw Error(ErrorClass::Data, "cannot write manifest: " + path);
    for (const auto& e : entries) {
        nlohmann::ordered_json j;
        j["path"] = e.path;
        j["colorspace"] = to_string(e.colorspace);
        j["split"] = e.split;
        out << j.dump() << '\n';
    }
}

std::vector<ManifestEntry> Manifest::split_entries(const std::string& split) const {
    std::vector<ManifestEntry> out;
    for (const auto& e : entries)
        if (e.split == split) out.push_back(e);
    return out;
}

}  // namespace disque
