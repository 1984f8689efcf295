"""Shrinking targets: geometry, covers, mass distributions and probes."""
from .geometry import (BoxDim, CoverCount, RectArray, TargetSpec, box_count, cover_count,
                       cylinder_rects, dim_box_attractor, dim_box_estimate, preimage_arrays,
                       preimage_rects, render_pgm)
from .measures import MeasureSpec, Schedule, build_schedule
from .probes import (EnergyResult, MuBall, ProbeResult, ball_profile, dynamical_membership,
                     energy_estimate, local_dim_probe, mu_ball)
