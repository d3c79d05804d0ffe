// Writes a synthetic fixture (rasters, reference polygons, manifest) for trying the CLI.
//
//   make_synthetic_sites <dir> [n_sites] [seed]
//   fieldlabel segment --manifest <dir>/manifest.jsonl --out <dir>/out

#include <cstdio>
#include <cstdlib>
#include <string>

#include "fieldlabel/synthetic.hpp"

int main(int argc, char** argv) {
    if (argc < 2) {
        std::fprintf(stderr, "usage: %s <dir> [n_sites] [seed]\n", argv[0]);
        return 1;
    }
    fieldlabel::synthetic::FixtureParams p;
    p.n_sites = argc > 2 ? std::atoi(argv[2]) : 8;
    p.seed = argc > 3 ? std::strtoull(argv[3], nullptr, 10) : 1;
    auto sites = fieldlabel::synthetic::make_fixture(p);
    const auto manifest = fieldlabel::synthetic::write_fixture(argv[1], sites);
    std::size_t fields = 0;
    for (const auto& s : sites) fields += s.fields.size();
    std::printf("%zu sites, %zu fields -> %s\n", sites.size(), fields, manifest.string().c_str());
    return 0;
}
