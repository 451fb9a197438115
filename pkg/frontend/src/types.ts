/** Wire types mirroring the inventory/changes HTTP API. */

export interface ControlRequirementSet {
  inventory_listed: boolean;
  design_standards: boolean;
  independent_validation: boolean;
  checking_controls: boolean;
  change_logs: boolean;
  change_monitoring: boolean;
  security: boolean;
  archiving: boolean;
}

export type Category = 'financial' | 'operational';
export type TierName = 'critical' | 'significant' | 'standard';
export type RecordStatus = 'active' | 'retired' | 'replaced';
export type ValidationState = 'never_validated' | 'due' | 'overdue' | 'current';

export interface ApplicationRecord {
  record_id: number;
  name: string;
  owner: string;
  line_manager: string;
  business_process: string;
  category: Category;
  tier: TierName;
  file_key: string | null;
  last_validated_at: string | null;
  validation_frequency_days: number;
  status: RecordStatus;
  status_note: string;
  created_at: string;
  updated_at: string;
  required_controls: ControlRequirementSet;
  validation_state: ValidationState;
  compliance_score: number | null;
}

export interface Problem {
  code: string;
  message: string;
  field?: string;
}

export interface CellPayload {
  t: string;
  v?: number | string | boolean;
  f?: string;
  locked: boolean;
  note?: string;
}

export type ChangeKind =
  | 'value_changed'
  | 'formula_changed'
  | 'cell_added'
  | 'cell_removed'
  | 'lock_changed';

export interface CellChange {
  sheet: string;
  addr: string;
  kind: ChangeKind;
  before: CellPayload | null;
  after: CellPayload | null;
}

export type EventState = 'auto_logged' | 'pending_review' | 'approved' | 'rejected';

export interface ReviewDecision {
  reviewer: string;
  decided_at: string;
  verdict: 'approved' | 'rejected';
  comment: string;
}

export interface ChangeEvent {
  event_id: number;
  file_key: string;
  from_snapshot: number;
  to_snapshot: number;
  changes: CellChange[];
  structural: boolean;
  author: string;
  triggered_rules: string[];
  state: EventState;
  recorded_at: string;
  decision: ReviewDecision | null;
}

export interface Summary {
  schema_version: number;
  total_records: number;
  active_by_category: Record<Category, number>;
  counts: Record<Category, Record<TierName, Record<RecordStatus, number>>>;
  validation_states: Record<ValidationState, number>;
  latest_scores: Record<string, number>;
}

export interface RegistrationInput {
  name: string;
  owner: string;
  line_manager?: string;
  business_process?: string;
  category: Category;
  tier: TierName;
  file_key?: string;
  validation_frequency_days?: number;
}
