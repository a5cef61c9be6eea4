#pragma once

#include "saspa/baseline.hpp"
#include "saspa/basis_selection.hpp"
#include "saspa/csv.hpp"
#include "saspa/dataset.hpp"
#include "saspa/ep.hpp"
#include "saspa/errors.hpp"
#include "saspa/heatmap.hpp"
#include "saspa/kernels.hpp"
#include "saspa/likelihoods.hpp"
#include "saspa/model_file.hpp"
#include "saspa/pipeline.hpp"
#include "saspa/posterior.hpp"
#include "saspa/synthetic.hpp"
