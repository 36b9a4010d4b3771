/**
 * Zod schemas for the palletbench dataset manifest, NDJSON samples, and
 * metrics reports. This package is a read-only consumer: schemas mirror the
 * primary emitter's formats and never recompute its metrics.
 */

import { z } from "zod";

export const SUPPORTED_SCHEMA_VERSION = "1";

const rle = z.array(z.number().int().nonnegative());

export const intrinsicsSchema = z.object({
  width: z.number().int().positive(),
  height: z.number().int().positive(),
  fx: z.number(),
  fy: z.number(),
  cx: z.number(),
  cy: z.number(),
});

export const cameraRigEntrySchema = z.object({
  intrinsics: intrinsicsSchema,
  cam_to_world: z.array(z.array(z.number()).length(4)).length(4),
});

export const episodeMetaSchema = z.object({
  id: z.string(),
  variant: z.string(),
  n_boxes: z.number().int().positive(),
  n_steps: z.number().int().nonnegative(),
  split: z.enum(["train", "test"]),
  task: z.record(z.unknown()),
  scene_config: z.record(z.unknown()),
  files: z.record(z.string().regex(/^[0-9a-f]{64}$/)),
});

export const manifestSchema = z.object({
  schema_version: z.string(),
  config: z.record(z.unknown()),
  grounding_suffix: z.string(),
  camera_rig: z.array(cameraRigEntrySchema),
  counts: z.object({
    action: z.number().int().nonnegative(),
    auxiliary: z.number().int().nonnegative(),
    terminal: z.number().int().nonnegative(),
    paraphrase: z.number().int().nonnegative(),
    total: z.number().int().nonnegative(),
  }),
  splits: z.object({
    train: z.array(z.string()),
    test: z.array(z.string()),
  }),
  episodes: z.array(episodeMetaSchema),
  file_digests: z.record(z.string().regex(/^[0-9a-f]{64}$/)),
});

const sampleBase = z.object({
  sample_id: z.string(),
  episode: z.string(),
  step: z.number().int().nonnegative(),
  split: z.enum(["train", "test"]),
  goal_text: z.string().min(1),
  cloud_ref: z.string(),
  point_count: z.number().int().positive(),
  done_probability: z.number().min(0).max(1),
  paraphrase_status: z.string().optional(),
  paraphrase_of: z.string().optional(),
});

export const actionSampleSchema = sampleBase.extend({
  kind: z.literal("action"),
  pick_mask_rle: rle,
  target_mask_rle: rle,
  action: z.object({
    pickup_id: z.number().int().nonnegative(),
    putdown: z.union([
      z.object({
        kind: z.literal("free-cell"),
        surface_id: z.number().int(),
        cell_index: z.number().int(),
        layer: z.number().int(),
      }),
      z.object({
        kind: z.literal("stack-top"),
        base_box_id: z.number().int(),
      }),
    ]),
  }),
  oracle_distance: z.number().nonnegative(),
});

export const auxiliarySampleSchema = sampleBase.extend({
  kind: z.literal("auxiliary"),
  predicate: z.enum([
    "free-cells",
    "placed-boxes",
    "stacked-boxes",
    "accessible-boxes",
    "unplaced-boxes",
  ]),
  answer_mask_rle: rle,
});

export const terminalSampleSchema = sampleBase.extend({
  kind: z.literal("terminal"),
});

export const sampleSchema = z.discriminatedUnion("kind", [
  actionSampleSchema,
  auxiliarySampleSchema,
  terminalSampleSchema,
]);

export type Manifest = z.infer<typeof manifestSchema>;
export type Sample = z.infer<typeof sampleSchema>;
export type ActionSample = z.infer<typeof actionSampleSchema>;

// ---------------------------------------------------------------------------
// Metrics report
// ---------------------------------------------------------------------------

const pctCell = z
  .object({ pct: z.number().min(0).max(100), count: z.number().int().positive() })
  .nullable();

const perBucket = z.record(pctCell);

const errorStats = z
  .object({ mean: z.number(), std: z.number(), count: z.number().int() })
  .nullable();

export const reportSchema = z.object({
  schema_version: z.string(),
  suite_config: z.record(z.unknown()),
  policy: z.object({ name: z.string(), privileged: z.boolean() }),
  modes: z.array(z.string()),
  one_step_validity: z.record(perBucket),
  placement_error: z.record(errorStats).nullable(),
  joint_iou: z.record(perBucket),
  target_iou_by_kind: z.record(z.record(pctCell)),
  plan_success: z.record(
    z.object({
      by_variant: z.record(perBucket),
      by_bucket: perBucket,
      aggregate: pctCell,
    }),
  ),
  outcomes: z.record(z.record(z.number().int())),
  n_episodes: z.record(z.number().int()),
});

export type Report = z.infer<typeof reportSchema>;

export const BUCKETS = ["1-10", "11-20", "21-30"] as const;
