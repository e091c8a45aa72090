#ifndef PINNMHD_PINNMHD_HPP
#define PINNMHD_PINNMHD_HPP

#include "pinnmhd/jet.hpp"
#include "pinnmhd/reverse.hpp"
#include "pinnmhd/autodiff.hpp"
#include "pinnmhd/spectral.hpp"
#include "pinnmhd/netfield.hpp"
#include "pinnmhd/mhdkernel.hpp"
#include "pinnmhd/loss.hpp"
#include "pinnmhd/solver.hpp"
#include "pinnmhd/io.hpp"

#endif  // PINNMHD_PINNMHD_HPP
