"""Closed-loop LQG flight control and cinematographic path planning for
generic rotary-wing drones, validated against a noisy simulated plant."""

from .cinematography import (ActorPose, CameraPose, MappingTables, PslShot,
                             SphereCoords, ToricCoords, format_psl, parse_psl,
                             pose_to_sphere, pose_to_toric, shot_to_manifold,
                             sphere_to_pose, toric_to_pose)
from .dynamics import (DroneGains, FlightCommand, HeadingState, NoiseModel,
                       PlantState, TranslationState, heading_rotation,
                       heading_step, plant_step, translation_matrices,
                       translation_step, wrap_angle)
from .estimation import (KalmanState, LinearGaussianModel, kf_predict,
                         kf_update)
from .harness import (RunLog, RunReport, compute_metrics, emit_log,
                      emit_plot_data, plan_reference, run_closed_loop)
from .planning import (ActorTrack, PathSegment, ReferenceSample,
                       SteeringConfig, builtin_trajectory, generate_reference,
                       interpolate_manifold, steer_arrive)
from .regulation import (GainSet, HeadingRegulatorConfig, RegulatorSession,
                         RegulatorWeights, controller_step, feedback_gain,
                         heading_gain, prefilter, solve_dare)
from .scenario import Scenario, demo_scenario, load_scenario, scenario_to_dict

__version__ = "0.1.0"
