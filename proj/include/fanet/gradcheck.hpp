#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace fanet {

struct GradcheckRow {
    std::string module;
    std::string leaf;  // parameter name or "<input>"
    double max_rel = 0.0;
    int elements = 0;
};

struct GradcheckReport {
    std::vector<GradcheckRow> rows;
    double tolerance = 1e-3;
    double step = 1e-3;
    bool pass = false;
    double seconds = 0.0;
};

// Central finite differences against the tape, in double precision, on
// small randomized fixtures. Selector is one of: all, encoder, fam, dem,
// rfb, dam, decoder. `tamper` corrupts one gradient on purpose so tests can
// confirm the harness actually detects disagreement.
GradcheckReport run_gradcheck(const std::string& selector, std::uint64_t seed,
                              double tolerance = 1e-3, double step = 1e-3, bool tamper = false);

void print_gradcheck(const GradcheckReport& report, std::ostream& os);

}  // namespace fanet
