#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "msgan/volume.hpp"

// Procedural two-domain phantoms: one shared geometry (smooth random
// ellipses over a textured background) rendered with two appearances —
// domain A sharpened with added noise, domain B gently smoothed. The
// geometry, and therefore the edge map, is a function of the seed only.

namespace msgan {

struct PhantomPair {
    Volume domain_a;
    Volume domain_b;
};

/// side must be base * 2^k (base defaults to the pyramid base of 32).
PhantomPair gen_phantom(std::uint64_t seed, int side, int ndim, int base = 32);

struct ManifestItem {
    int index = 0;
    std::uint64_t seed = 0;
    std::string path_a;  // relative to the manifest's directory
    std::string path_b;
};

struct Manifest {
    std::string path;  // the manifest CSV itself
    std::vector<ManifestItem> items;
};

/// Writes `count` phantom pairs as NDIMG files plus manifest.csv into
/// out_dir. Re-running with the same arguments reproduces every byte.
Manifest gen_dataset(std::uint64_t seed, int count, int side, int ndim,
                     const std::string& out_dir, int base = 32);

Manifest load_manifest(const std::string& path);

}  // namespace msgan
