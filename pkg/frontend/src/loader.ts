/**
 * Schema-validating dataset loader with digest verification and summary
 * statistics. Iteration yields samples exactly as emitted (the NDJSON line
 * is retained verbatim alongside the parsed object).
 */

import { createHash } from "node:crypto";
import { readFileSync } from "node:fs";
import { join } from "node:path";

import {
  Manifest,
  Sample,
  SUPPORTED_SCHEMA_VERSION,
  manifestSchema,
  sampleSchema,
} from "./schema.js";

export class SchemaMismatchError extends Error {
  readonly code = "schema-mismatch";
}

export class CorruptSampleError extends Error {
  readonly code = "corrupt-sample";
}

export interface LoadedSample {
  sample: Sample;
  raw: string;
}

export interface LoadedDataset {
  root: string;
  manifest: Manifest;
  samples: LoadedSample[];
}

function sha256(data: Buffer): string {
  return createHash("sha256").update(data).digest("hex");
}

export interface LoadOptions {
  verifyDigests?: boolean;
}

export function loadDataset(root: string, options: LoadOptions = {}): LoadedDataset {
  const verify = options.verifyDigests ?? true;
  let manifestRaw: string;
  try {
    manifestRaw = readFileSync(join(root, "manifest.json"), "utf-8");
  } catch (e) {
    throw new SchemaMismatchError(`no readable manifest.json under ${root}`);
  }
  const parsedJson = JSON.parse(manifestRaw);
  if (parsedJson?.schema_version !== SUPPORTED_SCHEMA_VERSION) {
    throw new SchemaMismatchError(
      `dataset schema ${parsedJson?.schema_version} unsupported (want ${SUPPORTED_SCHEMA_VERSION})`,
    );
  }
  const manifestResult = manifestSchema.safeParse(parsedJson);
  if (!manifestResult.success) {
    throw new SchemaMismatchError(`manifest invalid: ${manifestResult.error.issues[0]?.message}`);
  }
  const manifest = manifestResult.data;

  const samples: LoadedSample[] = [];
  const counted = { action: 0, auxiliary: 0, terminal: 0, paraphrase: 0 };
  for (const episode of manifest.episodes) {
    const episodeDir = join(root, "episodes", episode.id);
    for (const [rel, digest] of Object.entries(episode.files)) {
      let data: Buffer;
      try {
        data = readFileSync(join(episodeDir, rel));
      } catch (e) {
        throw new CorruptSampleError(`missing file ${episode.id}/${rel}`);
      }
      if (verify && sha256(data) !== digest) {
        throw new CorruptSampleError(`digest mismatch for ${episode.id}/${rel}`);
      }
    }
    const lines = readFileSync(join(episodeDir, "samples.ndjson"), "utf-8")
      .split("\n")
      .filter((line) => line.length > 0);
    for (const line of lines) {
      const result = sampleSchema.safeParse(JSON.parse(line));
      if (!result.success) {
        throw new CorruptSampleError(
          `sample invalid in ${episode.id}: ${result.error.issues[0]?.message}`,
        );
      }
      const sample = result.data;
      if (sample.paraphrase_of !== undefined) {
        counted.paraphrase += 1;
      } else {
        counted[sample.kind] += 1;
      }
      samples.push({ sample, raw: line });
    }
  }
  for (const key of ["action", "auxiliary", "terminal", "paraphrase"] as const) {
    if (manifest.counts[key] !== counted[key]) {
      throw new CorruptSampleError(
        `count mismatch for ${key}: manifest ${manifest.counts[key]} vs ${counted[key]} on disk`,
      );
    }
  }
  if (samples.length !== manifest.counts.total) {
    throw new CorruptSampleError(
      `total mismatch: manifest ${manifest.counts.total} vs ${samples.length}`,
    );
  }
  return { root, manifest, samples };
}

export interface DatasetSummary {
  totalSamples: number;
  byKind: Record<string, number>;
  bySplit: Record<string, number>;
  byVariant: Record<string, number>;
  episodes: number;
  meanStepsPerEpisode: number;
  meanPointCount: number;
}

export function summarize(ds: LoadedDataset): DatasetSummary {
  const byKind: Record<string, number> = {};
  const bySplit: Record<string, number> = {};
  let pointTotal = 0;
  for (const { sample } of ds.samples) {
    byKind[sample.kind] = (byKind[sample.kind] ?? 0) + 1;
    bySplit[sample.split] = (bySplit[sample.split] ?? 0) + 1;
    pointTotal += sample.point_count;
  }
  const byVariant: Record<string, number> = {};
  let steps = 0;
  for (const episode of ds.manifest.episodes) {
    byVariant[episode.variant] = (byVariant[episode.variant] ?? 0) + 1;
    steps += episode.n_steps;
  }
  const episodes = ds.manifest.episodes.length;
  return {
    totalSamples: ds.samples.length,
    byKind,
    bySplit,
    byVariant,
    episodes,
    meanStepsPerEpisode: episodes ? steps / episodes : 0,
    meanPointCount: ds.samples.length ? pointTotal / ds.samples.length : 0,
  };
}
