#pragma once

#include <string>

#include "finegrid/engine.hpp"

namespace finegrid {

// Binary PPM (P6) of the current grid: obstacles black, free cells white,
// one distinct color per profile. Row 0 of the image is the top of the
// grid. ascii_path gets a text rendering of the same frame ('.' free, '#'
// obstacle, one letter per profile); pass "" to skip it.
void render_snapshot(const Simulation& sim, const std::string& ppm_path,
                     const std::string& ascii_path);

}  // namespace finegrid
