"""Two-tier HetNet simulator and the two-step antenna-tuning RL stack."""

from .radio import AntennaConfig, RadioParams, LinkSample
from .geometry import (DeploymentConfig, Deployment, sample_deployment,
                       fixed_deployment, ue_geometry, associate)
from .mdp import (StateQuantizer, StateIndex, ActionSpace, RewardConfig,
                  quantize_sinr, encode_state, decode_state, encode_action,
                  decode_action, immediate_reward, period_state)
from .env import SectorWorld, OnlineEnv, PicoModel, INITIAL_CONFIG
from .meanfield import (MeanFieldTrainerConfig, MeanFieldPolicy, BetaTable,
                        mean_action, meanfield_train, estimate_beta,
                        relative_variance, check_equilibrium_stability)
from .online import (LinearQ, FeatureContext, EpsilonSchedule, TabularQ,
                     epsilon_value, eps_greedy_select, features, q_hat, update_w,
                     run_online_training, tabular_q_update, policy_compactness)
from .locnet import (SectorGeometry, ClusterGrid, ClusterNet, TrainingSet,
                     build_clusters, forward, train_net, assign_ue,
                     fingerprint_baseline, localization_accuracy,
                     cluster_quantization_loss)
from .config import ExperimentConfig, preset_config, parse_config_text, load_config

__version__ = "0.1.0"
