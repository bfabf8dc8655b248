#pragma once

#include "risfarm/harness.hpp"

namespace bench {

inline risfarm::SystemConfig table1() { return risfarm::make_table1_config(1); }
inline risfarm::SystemConfig desk() { return risfarm::make_desk_config(1); }

inline risfarm::SystemConfig with_n(risfarm::SystemConfig cfg, int n) {
    return risfarm::apply_sweep(cfg, "n_ris", n);
}

}  // namespace bench
