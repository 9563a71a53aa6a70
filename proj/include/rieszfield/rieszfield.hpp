#pragma once

#include "rieszfield/analysis.hpp"
#include "rieszfield/cim.hpp"
#include "rieszfield/error.hpp"
#include "rieszfield/fem.hpp"
#include "rieszfield/mesh.hpp"
#include "rieszfield/numerics/counters.hpp"
#include "rieszfield/numerics/eigen.hpp"
#include "rieszfield/numerics/fft.hpp"
#include "rieszfield/numerics/random.hpp"
#include "rieszfield/numerics/sparse.hpp"
#include "rieszfield/numerics/special.hpp"
#include "rieszfield/reference1d.hpp"
#include "rieszfield/riesz.hpp"
#include "rieszfield/spectral.hpp"
