#pragma once

#include "compclust/geometry.hpp"
#include "compclust/pattern.hpp"
#include "compclust/random.hpp"
#include "compclust/model.hpp"
#include "compclust/weight_table.hpp"
#include "compclust/sampler2.hpp"
#include "compclust/hungarian.hpp"
#include "compclust/tempering.hpp"
#include "compclust/multiproposal.hpp"
#include "compclust/samplerk.hpp"
#include "compclust/intensity.hpp"
#include "compclust/kcross.hpp"
#include "compclust/synth.hpp"
#include "compclust/diagnostics.hpp"
#include "compclust/osgrid.hpp"
#include "compclust/ingest.hpp"
