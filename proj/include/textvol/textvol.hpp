#pragma once

#include "textvol/common.hpp"
#include "textvol/energy.hpp"
#include "textvol/geodesic.hpp"
#include "textvol/geometry.hpp"
#include "textvol/image.hpp"
#include "textvol/io.hpp"
#include "textvol/mesh.hpp"
#include "textvol/metrics.hpp"
#include "textvol/pipeline.hpp"
#include "textvol/pngio.hpp"
#include "textvol/raster.hpp"
#include "textvol/shot.hpp"
#include "textvol/solver.hpp"
#include "textvol/ssim.hpp"
#include "textvol/synth.hpp"
#include "textvol/texcoord.hpp"
#include "textvol/volume.hpp"
