"""Binary hashing and distance toolkit for persistence diagrams."""

from .diagrams import (
    BoundingBox,
    DiagramSet,
    PersistenceDiagram,
    PersistencePoint,
    apply_bounding_box,
    generate_synthetic_diagram,
    generate_training_set,
    load_diagram,
    load_manifest,
    normalize,
    save_diagram,
    save_manifest,
)
from .vectorize import (
    DEFAULT_RESOLUTION,
    DenseVector,
    HistogramVector,
    betti_curve,
    histogram,
    persistence_image,
)
from .codes import BinaryCode, format_code, load_codes, pack_signs, parse_code, save_codes
from .distances import (
    DistanceMatrix,
    SinkhornConfig,
    default_epsilon,
    distance_matrix,
    hamming,
    l2,
    sinkhorn_hw,
    wasserstein,
)

__version__ = "0.1.0"
