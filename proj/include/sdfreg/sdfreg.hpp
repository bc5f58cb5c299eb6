// Copyright (c) 2026 the sdfreg authors.
// SPDX-License-Identifier: Apache-2.0
//
// Umbrella header: partial-to-full rigid registration of sparse point clouds
// against a gradient signed-distance field, with a Cauchy-IRLS robust loop
// and a synthetic experiment harness.
#pragma once

#include "sdfreg/errors.hpp"
#include "sdfreg/geometry.hpp"
#include "sdfreg/io.hpp"
#include "sdfreg/kdtree.hpp"
#include "sdfreg/mesh.hpp"
#include "sdfreg/metrics.hpp"
#include "sdfreg/registration.hpp"
#include "sdfreg/rng.hpp"
#include "sdfreg/sdf.hpp"
#include "sdfreg/shapes.hpp"
#include "sdfreg/simulate.hpp"
