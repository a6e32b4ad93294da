#pragma once

#include "lobsim/book.hpp"
#include "lobsim/config.hpp"
#include "lobsim/dgx.hpp"
#include "lobsim/features.hpp"
#include "lobsim/ingest.hpp"
#include "lobsim/observables.hpp"
#include "lobsim/powerlaw.hpp"
#include "lobsim/rates.hpp"
#include "lobsim/snapshot_io.hpp"
#include "lobsim/ssa.hpp"
