#pragma once

#include "mvr/adam.hpp"
#include "mvr/analysis.hpp"
#include "mvr/camera.hpp"
#include "mvr/checkpoint.hpp"
#include "mvr/connectivity.hpp"
#include "mvr/dataset.hpp"
#include "mvr/encoding.hpp"
#include "mvr/geometry_losses.hpp"
#include "mvr/marching_cubes.hpp"
#include "mvr/mesh.hpp"
#include "mvr/metrics.hpp"
#include "mvr/obj_io.hpp"
#include "mvr/objective.hpp"
#include "mvr/optimizer.hpp"
#include "mvr/rasterizer.hpp"
#include "mvr/remesh.hpp"
#include "mvr/service.hpp"
#include "mvr/shader.hpp"
#include "mvr/silhouette.hpp"
#include "mvr/synthetic.hpp"
#include "mvr/visual_hull.hpp"
