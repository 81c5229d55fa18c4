#pragma once

#include <string>
#include <vector>

#include "disque/distortion.hpp"
#include "disque/image.hpp"

namespace disque {

struct ManifestEntry {
    std::string path;
    Colorspace colorspace = Colorspace::SRGB;
    std::string split = "train";
};

// JSON-lines dataset manifest: one {"path","colorspace","split"} object per line.
struct Manifest {
    std::vector<ManifestEntry> entries;
    BankDomain bank_domain = BankDomain::SDR;

    // validate_decode checks that every path exists and decodes.
    static Manifest load(const std::string& path, bool validate_decode = true);
    void save(const std::string& path) const;

    std::vector<ManifestEntry> split_entries(const std::string& split) const;
};

}  // namespace disque
