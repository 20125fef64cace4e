# Curvature-dimension machinery
from .distortion import distortion_sigma, distortion_tau
from .measures import DiscreteMeasure, grid_block, renyi_entropy
from .transport import TransportPlan, optimal_plan, w2_geodesic
from .backends import EuclideanBackend, StructureBackend, ShootingBackend, ConeGrushinBackend
from .check import cd_inequality_check, scan_grushin_violation
