/** Client-side session view model and phase gating.
 *
 * The gating mirrors the server's state machine exactly, so the UI never
 * issues a request the server would reject: prompts are allowed in
 * `created` and `preview_ready`, finalize only in `preview_ready`, and a
 * pending request blocks everything until it settles.
 */

import type { FinalizeResponse, LatencyBreakdown, PromptResponse } from "./api.js";

export type Phase = "created" | "preview_ready" | "cloud_refining" | "refined" | "closed";

export interface TimelineEntry {
  roundIndex: number;
  prompt: string;
  imageUrl: string;
  strength: number | null;
  steps: number;
  latency: LatencyBreakdown;
  tier: "edge" | "cloud";
}

export interface SessionViewModel {
  sessionId: string | null;
  phase: Phase;
  rounds: TimelineEntry[];
  pending: boolean;
  error: string | null;
}

export function initialViewModel(): SessionViewModel {
  return { sessionId: null, phase: "created", rounds: [], pending: false, error: null };
}

export function canSubmitPrompt(vm: SessionViewModel): boolean {
  return !vm.pending && vm.sessionId !== null && (vm.phase === "created" || vm.phase === "preview_ready");
}

export function canFinalize(vm: SessionViewModel): boolean {
  return !vm.pending && vm.sessionId !== null && vm.phase === "preview_ready";
}

export function withSession(vm: SessionViewModel, sessionId: string): SessionViewModel {
  return { ...initialViewModel(), sessionId };
}

export function withPending(vm: SessionViewModel, pending: boolean): SessionViewModel {
  return { ...vm, pending, error: pending ? null : vm.error };
}

export function withError(vm: SessionViewModel, error: string): SessionViewModel {
  return { ...vm, pending: false, error };
}

export function dismissError(vm: SessionViewModel): SessionViewModel {
  return { ...vm, error: null };
}

export function applyPromptResponse(
  vm: SessionViewModel,
  prompt: string,
  response: PromptResponse,
): SessionViewModel {
  const entry: TimelineEntry = {
    roundIndex: response.round_index,
    prompt,
    imageUrl: response.image_url,
    strength: response.predicted_strength,
    steps: response.steps,
    latency: response.latency,
    tier: "edge",
  };
  return {
    ...vm,
    phase: response.phase as Phase,
    rounds: [...vm.rounds, entry].sort((a, b) => a.roundIndex - b.roundIndex),
    pending: false,
    error: null,
  };
}

export function applyFinalizeResponse(
  vm: SessionViewModel,
  response: FinalizeResponse,
): SessionViewModel {
  const last = vm.rounds[vm.rounds.length - 1];
  const entry: TimelineEntry = {
    roundIndex: last ? last.roundIndex : 0,
    prompt: last ? last.prompt : "",
    imageUrl: response.image_url,
    strength: response.strength_used,
    steps: response.steps,
    latency: response.latency,
    tier: "cloud",
  };
  return {
    ...vm,
    phase: response.phase as Phase,
    rounds: [...vm.rounds, entry],
    pending: false,
    error: null,
  };
}
