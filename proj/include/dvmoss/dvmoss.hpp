#pragma once

#include "dvmoss/channel.hpp"
#include "dvmoss/errors.hpp"
#include "dvmoss/feasinit.hpp"
#include "dvmoss/geometry.hpp"
#include "dvmoss/harness.hpp"
#include "dvmoss/jubpa.hpp"
#include "dvmoss/matching.hpp"
#include "dvmoss/netstate.hpp"
#include "dvmoss/network_configuration.hpp"
#include "dvmoss/orbits.hpp"
#include "dvmoss/power.hpp"
#include "dvmoss/scenario.hpp"
#include "dvmoss/selector.hpp"
