#pragma once

// Umbrella header: low-rank dielectric-matrix inversion (ISDF +
// Sherman-Morrison-Woodbury + elliptic-contour quadrature) and static-COHSEX
// G0W0 self-energies on periodic grids.

#include "lrgw/contour.hpp"
#include "lrgw/dft.hpp"
#include "lrgw/driver.hpp"
#include "lrgw/elliptic.hpp"
#include "lrgw/errors.hpp"
#include "lrgw/grid.hpp"
#include "lrgw/gw.hpp"
#include "lrgw/isdf.hpp"
#include "lrgw/linalg.hpp"
#include "lrgw/matrix.hpp"
#include "lrgw/model.hpp"
#include "lrgw/parallel.hpp"
#include "lrgw/rng.hpp"
#include "lrgw/smw.hpp"
