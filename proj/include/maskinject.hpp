#pragma once

#include "maskinject/bench.hpp"
#include "maskinject/config.hpp"
#include "maskinject/dmi.hpp"
#include "maskinject/error.hpp"
#include "maskinject/geometry.hpp"
#include "maskinject/gradcheck.hpp"
#include "maskinject/io.hpp"
#include "maskinject/mask.hpp"
#include "maskinject/oracles.hpp"
#include "maskinject/parallel.hpp"
#include "maskinject/params.hpp"
#include "maskinject/pipeline.hpp"
#include "maskinject/random.hpp"
#include "maskinject/render.hpp"
#include "maskinject/sam_sim.hpp"
#include "maskinject/scene.hpp"
#include "maskinject/smagg.hpp"
#include "maskinject/tspp.hpp"
#include "maskinject/tspp_head.hpp"
