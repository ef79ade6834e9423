"""People tracking: leg Kalman filters, GNN association, person initiation."""
from .association import Assignment, associate, associate_points, cost_matrix, solve_assignment
from .kalman import KalmanModel, LegTrack, kf_predict, kf_update, new_track, update_confidence
from .local_grid import LocalGrid
from .tracker import (PersonTrack, TrackerOutput, TrackerState, delete_tracks, initiate_person_tracks,
                      person_view, to_sensor_frame, tracker_step)

__all__ = [
    "Assignment", "associate", "associate_points", "cost_matrix", "solve_assignment",
    "KalmanModel", "LegTrack", "kf_predict", "kf_update", "new_track", "update_confidence",
    "LocalGrid", "PersonTrack", "TrackerOutput", "TrackerState", "delete_tracks",
    "initiate_person_tracks", "person_view", "to_sensor_frame", "tracker_step",
]
