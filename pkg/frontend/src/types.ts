// Server-side session projection, mirrored field-for-field. The UI never
// invents state: everything renders from these objects.

export type SessionState =
  | "created"
  | "initial_generated"
  | "candidates_retrieved"
  | "candidate_selected"
  | "routed"
  | "guidance_ready"
  | "edited"
  | "completed"
  | "failed";

export const SESSION_STATES: SessionState[] = [
  "created",
  "initial_generated",
  "candidates_retrieved",
  "candidate_selected",
  "routed",
  "guidance_ready",
  "edited",
  "completed",
  "failed",
];

export type IngestStatus =
  | "pending"
  | "ingested"
  | "fetch_failed"
  | "duplicate"
  | "unsupported";

export type Strategy = "instruction_edit" | "image_prompt_edit";

export interface ArtifactView {
  content_hash: string;
  byte_length: number;
  media_type: string;
  width: number;
  height: number;
  source_role: "generated" | "retrieved" | "edited";
  origin: string | null;
  parent_hashes: string[];
}

export interface CandidateView {
  rank: number;
  origin_url: string;
  thumbnail_url: string | null;
  title: string | null;
  artifact: ArtifactView | null;
  ingest_status: IngestStatus;
  status_detail: string | null;
}

export interface GuidanceView {
  kind: "edit_instruction" | "factual_prompt";
  text: string;
  metaprompt_hash: string;
  raw_response: string;
  llm_backend_id: string;
}

export interface EventView {
  sequence: number;
  kind: string;
  payload: Record<string, unknown>;
  occurred_at: string;
}

export interface SessionView {
  session_id: string;
  prompt: {
    text: string;
    subject_hint: string | null;
    temporal_qualifier: string | null;
    taxonomy_hint: string | null;
  };
  state: SessionState;
  retrieval_count_n: number;
  initial_image: ArtifactView | null;
  candidates: CandidateView[];
  selected_index: number | null;
  taxonomy: string | null;
  scope: string | null;
  strategy: Strategy | null;
  strategy_overridden: boolean;
  guidance: GuidanceView | null;
  edited_image: ArtifactView | null;
  created_at: string;
  updated_at: string;
  event_log: EventView[];
  step_in_flight: boolean;
}

export const GUIDANCE_MAX_CHARS: Record<GuidanceView["kind"], number> = {
  edit_instruction: 300,
  factual_prompt: 1000,
};
