from .types import (AGENT_TYPES, POLYLINE_CLASSES, ROADPOINT_DIM, TL_STATES,
                    AgentTrack, RoadGraph, Scenario, ValidationError,
                    class_onehot, light_onehot, type_onehot)
from .transforms import inverse_transform, recenter_on_agent, transform_scene
from .io import (FORMAT_NAME, ScenarioFormatError, load_corpus, load_scenario,
                 save_corpus, save_scenario, scenario_from_lines,
                 scenario_to_lines)
from .generate import (ARCHETYPES, GeneratorConfig, InfeasibleConfigError,
                       LanePath, generate_corpus, generate_scenario)
from .presets import PRESETS, following_scenario, lane_change_scenario

__all__ = [
    "AGENT_TYPES", "POLYLINE_CLASSES", "ROADPOINT_DIM", "TL_STATES",
    "AgentTrack", "RoadGraph", "Scenario", "ValidationError",
    "class_onehot", "light_onehot", "type_onehot",
    "inverse_transform", "recenter_on_agent", "transform_scene",
    "FORMAT_NAME", "ScenarioFormatError", "load_corpus", "load_scenario",
    "save_corpus", "save_scenario", "scenario_from_lines", "scenario_to_lines",
    "ARCHETYPES", "GeneratorConfig", "InfeasibleConfigError", "LanePath",
    "generate_corpus", "generate_scenario",
    "PRESETS", "following_scenario", "lane_change_scenario",
]
