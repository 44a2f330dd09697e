// Wire types mirroring the service's JSON payloads.

export interface ScenarioInfo {
  id: string;
  subject: string;
  title: string;
  narrative: string;
  learning_objective: string;
  applicable_dimensions: string[];
  dimension_notes: Record<string, string>;
}

export interface ScenariosPayload {
  dimension_order: string[];
  dimension_definitions: Record<string, string>;
  scenarios: ScenarioInfo[];
}

export type ItemKind = 'MCQ' | 'TF' | 'OE';

export interface AssessmentItemInfo {
  id: string;
  kind: ItemKind;
  stem: string;
  options: string[];
}

export interface AssessmentPayload {
  form_id: string;
  version: string;
  items: AssessmentItemInfo[];
}

export interface SurveyItemInfo {
  id: string;
  stem: string;
}

export interface WarmupItemInfo {
  id: string;
  kind: 'TF' | 'MCQ';
  stem: string;
  options: string[];
  hint: string;
}

export interface SurveyPayload {
  pre_survey: SurveyItemInfo[];
  post_survey: SurveyItemInfo[];
  reflection: SurveyItemInfo[];
  warmup: WarmupItemInfo[];
}

export interface GradeVerdict {
  pass: boolean;
  explanation: string;
}

export interface GradeReportPayload {
  scenario_id: string;
  grader_kind: string;
  template_version: string;
  verdicts: Record<string, GradeVerdict>;
}

export interface WarmupResult {
  item_id: string;
  correct: boolean;
  feedback: string;
}

// Server-derived session view; the server is the source of truth.
export interface SessionView {
  session_id: string;
  student_id: string;
  phase: string;
  step: string | null;
  scenario_index: number | null;
  attempts: number[];
  legal_events: string[];
  scenario_id?: string;
  last_response?: string | null;
  last_grade?: GradeReportPayload | null;
  warmup_result?: WarmupResult;
  response_text?: string;
  attempt_index?: number;
  report?: GradeReportPayload;
}

export type TestAnswers = Record<string, number | boolean | string>;
export type LikertAnswers = Record<string, number>;
export type TextAnswers = Record<string, string>;
