#pragma once

// CSV schemas for worlds and panels.  Absent pupils' scores are written as
// empty cells; world files carry the latent state so a reload reproduces the
// generator's output exactly.

#include <string>
#include <vector>

#include "p4p/world.hpp"

namespace p4p::io {

void export_world(const world::World& w, const std::string& dir);
world::World load_world(const std::string& dir);

void export_outcomes(const world::World& w, const world::Outcomes& o, const std::string& dir);
world::Outcomes load_outcomes(const world::World& w, const std::string& dir);

struct Violation {
    std::string file;
    std::string message;
};

// Referential-integrity sweep over an exported directory.  Returns every
// violation found rather than stopping at the first.
std::vector<Violation> validate_panel(const std::string& dir);

// Throws IntegrityError listing all violations when any exist.
void load_panel_checked(const std::string& dir);

} // namespace p4p::io
