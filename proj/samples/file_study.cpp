// Host-level study: files of 1..8 tracks against the outcome probabilities of a
// finished run.
//
//   dependasim run --profile desk --out-dir out
//   sample_file_study out/summary.json 1000000

#include <cstdio>
#include <cstdlib>
#include <string>

#include "dependasim/level1.hpp"

using namespace dependasim;

int main(int argc, char** argv) {
    if (argc < 2) {
        std::fprintf(stderr, "usage: %s SUMMARY_JSON [N_FILES] [SEED]\n", argv[0]);
        return 2;
    }
    const std::uint64_t n_files = argc > 2 ? std::strtoull(argv[2], nullptr, 10) : 100'000;
    const std::uint64_t seed = argc > 3 ? std::strtoull(argv[3], nullptr, 10) : 1;
    try {
        const auto p = BlackBoxProbabilities::load(argv[1]);
        RngRegistry rngs(seed);
        auto rng = rngs.fork("level1.files");
        const auto study = run_file_study(p, n_files, FileSizeDist{}, rng);
        std::printf("%-22s %12s %12s\n", "outcome", "per track", "per file");
        for (auto o : kAllOutcomes)
            std::printf("%-22s %12.4e %12.4e\n", std::string(outcome_name(o)).c_str(), p.of(o), study.fraction(o));
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const IoError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
    return 0;
}
