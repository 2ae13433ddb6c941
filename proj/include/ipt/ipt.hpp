// ipt: inverse path tracing toolkit
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "ipt/bvh.hpp"
#include "ipt/checkpoint.hpp"
#include "ipt/common.hpp"
#include "ipt/fenwick.hpp"
#include "ipt/gradients.hpp"
#include "ipt/imaging.hpp"
#include "ipt/lightsampler.hpp"
#include "ipt/materials.hpp"
#include "ipt/optimize.hpp"
#include "ipt/parallel.hpp"
#include "ipt/params.hpp"
#include "ipt/render.hpp"
#include "ipt/rng.hpp"
#include "ipt/scene.hpp"
#include "ipt/scene_io.hpp"
#include "ipt/transport.hpp"
