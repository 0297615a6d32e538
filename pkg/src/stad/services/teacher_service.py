"""Service for teacher pretraining."""

import time
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from ..core.exceptions import ConfigError, DataError
from ..models import AugmentConfig, DistillTargetSet, RunConfig, TeacherCheckpoint, TeacherLossWeights
from ..nets.decoder import DecoderSpec, build_decoder
from ..nets.patch_net import IN_CHANNELS, PatchNet, build_teacher_patch_net
from ..numerics import AdamState, ComputeGraph, adam_step, backward
from ..training.augment import sample_triplet_batch
from ..training.losses import teacher_loss
from ..utils.logging import get_logger

logger = get_logger("teacher_service")

# Seed-sequence slot of the distillation draw; triplet slots are 0..batch_size-1
DISTILL_SLOT = 2 ** 31 - 1


class TeacherService:
    """Pretrains patch-sized teacher networks on triplets and/or distillation targets."""

    def __init__(self, config: RunConfig):
        self.config = config
        logger.info("Initialized TeacherService")

    def loss_weights(self) -> TeacherLossWeights:
        return TeacherLossWeights(
            lambda_k=self.config.teacher_lambda_k,
            lambda_m=self.config.teacher_lambda_m,
            lambda_c=self.config.teacher_lambda_c,
            margin=self.config.teacher_margin,
        )

    def augment_config(self, patch_size: int) -> AugmentConfig:
        return AugmentConfig(
            patch_size=patch_size,
            noise_std=self.config.noise_std,
            grayscale_prob=self.config.grayscale_prob,
            luminance_range=(self.config.luminance_min, self.config.luminance_max),
            rng_seed=self.config.seed,
        )

    def _adam(self) -> AdamState:
        cfg = self.config
        return AdamState(
            lr=cfg.teacher_lr,
            beta1=cfg.adam_beta1,
            beta2=cfg.adam_beta2,
            eps=cfg.adam_eps,
            weight_decay=cfg.teacher_weight_decay,
            decoupled=cfg.decoupled_weight_decay,
        )

    def _check_inputs(
        self,
        patch_size: int,
        corpus: Sequence[np.ndarray],
        weights: TeacherLossWeights,
        targets: Optional[DistillTargetSet],
    ) -> bool:
        """Validate the inputs; returns whether triplets are needed."""
        if weights.lambda_k > 0:
            if targets is None:
                raise ConfigError("teacher_lambda_k > 0 requires distillation targets")
            if targets.patch_size != patch_size or targets.patches.shape[1] != IN_CHANNELS:
                raise ConfigError(
                    f"Distillation patches are {targets.patches.shape[1:]}, teacher expects "
                    f"({IN_CHANNELS}, {patch_size}, {patch_size})"
                )
            if targets.target_dim != self.config.distill_target_dim:
                raise ConfigError(
                    f"Distillation targets have dim {targets.target_dim}, "
                    f"distill_target_dim is {self.config.distill_target_dim}"
                )
        needs_triplets = weights.lambda_m > 0 or (weights.lambda_c > 0 and weights.lambda_k == 0)
        if needs_triplets and len(corpus) < 2:
            raise DataError(f"Teacher pretraining needs a corpus of at least 2 images, got {len(corpus)}")
        return needs_triplets

    def train_teacher(
        self,
        corpus: Sequence[np.ndarray],
        patch_size: int,
        weights: Optional[TeacherLossWeights] = None,
        targets: Optional[DistillTargetSet] = None,
        iterations: Optional[int] = None,
        progress_callback: Optional[Callable[[int, Dict[str, float]], None]] = None,
    ) -> TeacherCheckpoint:
        """
        Train a teacher for receptive field ``patch_size``.

        Args:
            corpus: Images (3, H, W) in [0, 1] used to sample triplets
            patch_size: Receptive field p
            weights: Loss weights (defaults to the run config)
            targets: Distillation targets, required when λk > 0
            iterations: Overrides ``teacher_iterations``
            progress_callback: Called after every iteration with (iteration, loss parts)

        Returns:
            TeacherCheckpoint with the trained network, decoder and loss trace
        """
        cfg = self.config
        weights = weights or self.loss_weights()
        iterations = iterations if iterations is not None else cfg.teacher_iterations
        needs_triplets = self._check_inputs(patch_size, corpus, weights, targets)

        net = build_teacher_patch_net(patch_size, cfg.descriptor_dim, cfg.channel_scale, seed=cfg.seed)
        decoder: Optional[DecoderSpec] = None
        if weights.lambda_k > 0:
            decoder = build_decoder(cfg.descriptor_dim, targets.target_dim, seed=cfg.seed + 1)
        augment = self.augment_config(patch_size)
        net_state, dec_state = self._adam(), self._adam()

        logger.info(
            f"Training teacher p={patch_size} for {iterations} iterations "
            f"(λk={weights.lambda_k}, λm={weights.lambda_m}, λc={weights.lambda_c}, "
            f"{net.params.num_parameters()} parameters)"
        )
        loss_trace: List[Dict[str, float]] = []
        start = time.perf_counter()
        for iteration in range(1, iterations + 1):
            triplets = None
            if needs_triplets:
                triplets = sample_triplet_batch(corpus, augment, iteration, cfg.teacher_batch_size, cfg.num_workers)
            distill_patches = distill_targets = None
            if weights.lambda_k > 0:
                rng = np.random.default_rng([cfg.seed, iteration, DISTILL_SLOT])
                distill_patches, distill_targets = targets.sample(rng, cfg.teacher_batch_size)

            with ComputeGraph() as graph:
                total, parts = teacher_loss(net, weights, triplets, decoder, distill_patches, distill_targets)
            net.params.zero_grad()
            if decoder is not None:
                decoder.params.zero_grad()
            backward(graph, total)
            adam_step(net.params, net_state)
            if decoder is not None:
                adam_step(decoder.params, dec_state)

            loss_trace.append(parts)
            if iteration == 1 or iteration % cfg.log_every == 0 or iteration == iterations:
                terms = ", ".join(f"{k}={v:.5f}" for k, v in parts.items())
                logger.info(f"[p={patch_size}] iteration {iteration}/{iterations}: {terms}")
            if progress_callback:
                progress_callback(iteration, parts)

        logger.info(f"Teacher p={patch_size} trained in {time.perf_counter() - start:.1f}s")
        return TeacherCheckpoint(
            net=net,
            decoder=decoder,
            config=cfg.portable_dict(),
            loss_trace=loss_trace,
            seed=cfg.seed,
            iteration=iterations,
        )


def describe_teacher(net: PatchNet) -> List[List[str]]:
    """Rows (layer, C, H, W) of the shape trace on a p×p input."""
    return [[name, str(c), str(h), str(w)] for name, c, h, w in net.trace_shapes(net.patch_size)]
