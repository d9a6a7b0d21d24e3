#include "finegrid/snapshot.hpp"

#include <array>
#include <cctype>
#include <fstream>
#include <unordered_map>

#include "finegrid/errors.hpp"

namespace finegrid {

namespace {

struct Rgb {
  unsigned char r, g, b;
};

constexpr std::array<Rgb, 6> kPalette = {{
    {38, 90, 205},    // pedestrian: blue
    {213, 94, 0},     // orange
    {0, 158, 115},    // green
    {204, 121, 167},  // pink
    {230, 190, 30},   // yellow
    {86, 180, 233},   // sky
}};

}  // namespace

void render_snapshot(const Simulation& sim, const std::string& ppm_path,
                     const std::string& ascii_path) {
  const Grid& g = sim.grid();

  std::unordered_map<int32_t, int32_t> profile_of;
  for (const Agent& a : sim.agents()) profile_of[a.id] = a.profile_index;

  std::ofstream ppm(ppm_path, std::ios::binary);
  if (!ppm) throw ConfigError("cannot write snapshot to '" + ppm_path + "'");
  ppm << "P6\n" << g.cols() << ' ' << g.rows() << "\n255\n";

  std::ofstream txt;
  if (!ascii_path.empty()) {
    txt.open(ascii_path);
    if (!txt) throw ConfigError("cannot write snapshot to '" + ascii_path + "'");
  }

  std::vector<unsigned char> scanline(static_cast<size_t>(g.cols()) * 3);
  std::string txtline(static_cast<size_t>(g.cols()), '.');
  for (int32_t r = g.rows() - 1; r >= 0; --r) {
    for (int32_t c = 0; c < g.cols(); ++c) {
      const int32_t v = g.occupancy({r, c});
      Rgb px{255, 255, 255};
      char ch = '.';
      if (v == kCellObstacle) {
        px = {0, 0, 0};
        ch = '#';
      } else if (v >= 0) {
        const int32_t p = profile_of.at(v);
        px = kPalette[static_cast<size_t>(p) % kPalette.size()];
        const std::string& name = sim.profiles()[p].name;
        ch = name.empty() ? '?' : static_cast<char>(std::toupper(name[0]));
      }
      scanline[c * 3 + 0] = px.r;
      scanline[c * 3 + 1] = px.g;
      scanline[c * 3 + 2] = px.b;
      txtline[c] = ch;
    }
    ppm.write(reinterpret_cast<const char*>(scanline.data()),
              static_cast<std::streamsize>(scanline.size()));
    if (txt.is_open()) txt << txtline << '\n';
  }
  if (!ppm) throw ConfigError("write failed for '" + ppm_path + "'");
}

}  // namespace finegrid
