#pragma once

#include "nbv/bvh.hpp"
#include "nbv/camera.hpp"
#include "nbv/core.hpp"
#include "nbv/dataset.hpp"
#include "nbv/evolution.hpp"
#include "nbv/experiment.hpp"
#include "nbv/fitness.hpp"
#include "nbv/forest.hpp"
#include "nbv/mesh.hpp"
#include "nbv/render.hpp"
#include "nbv/visibility.hpp"
