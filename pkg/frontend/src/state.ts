// Client session store: the server view plus in-flight UI state (draft
// prompt text, pending flag, error banner). All guards derive from the
// server's view so the client can never race ahead of the state machine.

import type { GradeReportPayload, GradeVerdict, SessionView } from './types';

export interface UiState {
  view: SessionView | null;
  drafts: Record<number, string>; // scenario_index -> editor draft
  pending: boolean;
  banner: string | null; // non-destructive error banner
}

export type Listener = (state: UiState) => void;

export class SessionStore {
  private state: UiState = { view: null, drafts: {}, pending: false, banner: null };
  private listeners: Listener[] = [];

  get current(): UiState {
    return this.state;
  }

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private emit(): void {
    for (const listener of this.listeners) listener(this.state);
  }

  setView(view: SessionView): void {
    this.state = { ...this.state, view, banner: null };
    this.emit();
  }

  setDraft(scenarioIndex: number, text: string): void {
    this.state = {
      ...this.state,
      drafts: { ...this.state.drafts, [scenarioIndex]: text },
    };
    this.emit();
  }

  /** Retry keeps the scenario context and clears only the editor. */
  clearDraft(scenarioIndex: number): void {
    this.setDraft(scenarioIndex, '');
  }

  draft(scenarioIndex: number | null): string {
    if (scenarioIndex === null) return '';
    return this.state.drafts[scenarioIndex] ?? '';
  }

  setPending(pending: boolean): void {
    this.state = { ...this.state, pending };
    this.emit();
  }

  showBanner(message: string): void {
    this.state = { ...this.state, banner: message };
    this.emit();
  }

  clearBanner(): void {
    if (this.state.banner !== null) {
      this.state = { ...this.state, banner: null };
      this.emit();
    }
  }
}

// -- guards (mirrors of the server-side transition relation) -----------------

export function inPractice(view: SessionView | null): boolean {
  return view?.phase === 'Practice';
}

export function canSubmitPrompt(view: SessionView | null, draft: string): boolean {
  return (
    !!view &&
    view.legal_events.includes('PromptSubmitted') &&
    draft.trim().length > 0
  );
}

/** "Check my prompt" is reachable only once a chatbot response is shown. */
export function canCheckPrompt(view: SessionView | null): boolean {
  return !!view && view.legal_events.includes('GradeReceived') && !!view.last_response;
}

export function canChoose(view: SessionView | null): boolean {
  return !!view && view.legal_events.includes('AdvanceChosen');
}

export function responseShown(view: SessionView | null): boolean {
  return !!view && typeof view.last_response === 'string' && view.last_response.length > 0;
}

/** Verdicts arranged by the API-provided canonical dimension order. */
export function orderedVerdicts(
  report: GradeReportPayload,
  dimensionOrder: string[],
): Array<[string, GradeVerdict]> {
  const out: Array<[string, GradeVerdict]> = [];
  for (const dim of dimensionOrder) {
    if (dim in report.verdicts) {
      out.push([dim, report.verdicts[dim]]);
    }
  }
  return out;
}

export function likertComplete(answers: Record<string, number>, itemIds: string[]): boolean {
  return itemIds.every((id) => Number.isInteger(answers[id]) && answers[id] >= 1 && answers[id] <= 5);
}
