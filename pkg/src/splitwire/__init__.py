"""Split sub-conductor extraction and wire reconstruction from power-line point clouds."""

from .centerline import ParabolaModel, SpanFrame, compute_centerline, fit_parabola, fit_span_frame, project, relative_coords
from .dpc import ClusterResult, Decision, DpcParams, cluster
from .pipeline import extract
from .pointcloud_io import PointCloud, read_ply_ascii, read_xyz, write_labels_csv
from .synth import BundleSpec, generate, label_accuracy
from .wire_fit import BundleGeometry, WireModel, bundle_geometry, fit_subconductor, sample_wire

__version__ = "0.1.0"
