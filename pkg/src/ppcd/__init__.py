"""Privacy-preserving clustering with rotation-based data transformations."""

from .clustering import Clustering, KMeansConfig, euclidean_dist, kmeans, label_agreement, warm_start_merge
from .dataset import Dataset, gen_synthetic, load_csv, pad_to_even, partition, save_csv
from .ledger import ReleaseLedger
from .rotation import RotationMatrix, apply, build_rotation, compose, seed_to_angle, unification_angle
from .transform import (ClientSecrets, TransformedDataset, arbt_client_release, inner_product_blocks, mrbt, rbt,
                        refresh_parameters, server_unify)

__version__ = "0.1.0"
