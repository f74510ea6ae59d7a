"""High-resolution home location from geo-tagged activity."""

from .cascade import (
    CascadeConfig,
    CascadeModel,
    HomePrediction,
    forest_prune,
    forest_train,
    label_records,
    predict_homes,
    predict_user,
    read_predictions,
    scorer_rank,
    scorer_train,
    train_cascade,
    user_records,
    verifier_decide,
    verifier_train,
    write_predictions,
)
from .clustering import Cluster, dbscan_user, group_by_user
from .features import FEATURES, ClusterRecord, LocationIndex, extract_records, read_records, write_records
from .forest import DecisionTree, RandomForest
from .nets import DenseNet
