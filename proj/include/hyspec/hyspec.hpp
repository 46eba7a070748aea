#pragma once

#include "hyspec/error.hpp"
#include "hyspec/matrix.hpp"
#include "hyspec/tickdata.hpp"
#include "hyspec/sync.hpp"
#include "hyspec/estimators.hpp"
#include "hyspec/spectral.hpp"
#include "hyspec/lsd.hpp"
#include "hyspec/rng.hpp"
#include "hyspec/simgen.hpp"
#include "hyspec/io.hpp"
