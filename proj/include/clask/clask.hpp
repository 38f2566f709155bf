#pragma once

#include "clask/bounds.hpp"
#include "clask/classifier.hpp"
#include "clask/commands.hpp"
#include "clask/config.hpp"
#include "clask/data.hpp"
#include "clask/embedding.hpp"
#include "clask/hierarchy.hpp"
#include "clask/kernel.hpp"
#include "clask/metric.hpp"
#include "clask/model_io.hpp"
#include "clask/subspace.hpp"
#include "clask/synth.hpp"
