#pragma once

// Umbrella header.

#include "embedding.hpp"
#include "engine.hpp"
#include "envsim.hpp"
#include "errors.hpp"
#include "graph_io.hpp"
#include "ids.hpp"
#include "memory.hpp"
#include "oracle.hpp"
#include "persistence.hpp"
#include "remote_oracle.hpp"
#include "report.hpp"
#include "rewards.hpp"
#include "rng.hpp"
#include "run.hpp"
#include "sakg.hpp"
#include "scripted_oracle.hpp"
#include "stores.hpp"
#include "trace.hpp"
#include "world_io.hpp"
#include "worldgen.hpp"
