// Application shell: loads content, starts or restores a session from the
// URL hash, renders the current phase, and maps each user action to exactly
// one API call. Server rejections surface as a banner without touching the
// student's work.

import { ApiClient, ApiError, MutationInFlight, NetworkError } from './api';
import {
  canCheckPrompt,
  canChoose,
  canSubmitPrompt,
  likertComplete,
  SessionStore,
} from './state';
import { el, gradePanel, likertRow, scenarioCard, testItemRow, warmupCard } from './screens';
import type {
  AssessmentPayload,
  ScenariosPayload,
  SessionView,
  SurveyPayload,
  TestAnswers,
} from './types';

export class App {
  readonly store = new SessionStore();
  private scenariosPayload!: ScenariosPayload;
  private assessmentPayload!: AssessmentPayload;
  private surveyPayload!: SurveyPayload;

  // transient per-screen form state
  private likertAnswers: Record<string, number> = {};
  private testAnswers: TestAnswers = {};
  private reflectionAnswers: Record<string, string> = {};

  constructor(
    private readonly api: ApiClient,
    private readonly root: HTMLElement,
    private readonly hash: { get(): string; set(value: string): void } = defaultHash(),
  ) {}

  async boot(): Promise<void> {
    [this.scenariosPayload, this.assessmentPayload, this.surveyPayload] = await Promise.all([
      this.api.scenarios(),
      this.api.assessment(),
      this.api.survey(),
    ]);
    this.store.subscribe(() => this.render());
    const existing = this.hash.get();
    if (existing) {
      // reload mid-session: restore the server-derived view exactly
      this.store.setView(await this.api.session(existing));
    } else {
      this.renderLogin();
    }
  }

  get view(): SessionView | null {
    return this.store.current.view;
  }

  private async action(run: () => Promise<SessionView>): Promise<void> {
    this.store.setPending(true);
    try {
      const view = await run();
      this.store.setView(view);
    } catch (error) {
      if (error instanceof MutationInFlight) {
        return; // ignore double-clicks while a request is pending
      }
      if (error instanceof NetworkError) {
        this.store.showBanner('Network problem. Your work is kept; try again.');
      } else if (error instanceof ApiError) {
        this.store.showBanner(error.message);
      } else {
        throw error;
      }
    } finally {
      this.store.setPending(false);
    }
  }

  async startSession(studentId: string): Promise<void> {
    await this.action(async () => {
      const view = await this.api.startSession(studentId);
      this.hash.set(view.session_id);
      return view;
    });
  }

  // -- per-screen actions, one API call each ---------------------------------

  submitSurvey(which: 'pre' | 'post'): Promise<void> {
    const sid = this.view!.session_id;
    const answers = { ...this.likertAnswers };
    return this.action(() => this.api.submitSurvey(sid, which, answers));
  }

  submitTest(): Promise<void> {
    const sid = this.view!.session_id;
    const answers = { ...this.testAnswers };
    return this.action(() => this.api.submitTest(sid, answers));
  }

  answerWarmup(itemId: string, answer: boolean | number): Promise<void> {
    const sid = this.view!.session_id;
    return this.action(() => this.api.answerWarmup(sid, itemId, answer));
  }

  generate(): Promise<void> {
    const view = this.view!;
    const draft = this.store.draft(view.scenario_index);
    return this.action(() => this.api.submitPrompt(view.session_id, draft));
  }

  check(): Promise<void> {
    return this.action(() => this.api.checkPrompt(this.view!.session_id));
  }

  choose(action: 'retry' | 'next'): Promise<void> {
    const view = this.view!;
    const scenarioIndex = view.scenario_index;
    return this.action(async () => {
      const next = await this.api.advance(view.session_id, action);
      if (action === 'retry' && scenarioIndex !== null) {
        this.store.clearDraft(scenarioIndex); // clears only the editor
      }
      return next;
    });
  }

  submitReflection(): Promise<void> {
    const sid = this.view!.session_id;
    const answers = { ...this.reflectionAnswers };
    return this.action(() => this.api.submitReflection(sid, answers));
  }

  // -- rendering ---------------------------------------------------------------

  private renderLogin(): void {
    this.root.replaceChildren();
    const input = el('input', {
      type: 'text',
      id: 'student-id',
      placeholder: 'Enter your class code',
    }) as HTMLInputElement;
    const button = el('button', { id: 'start' }, ['Start']);
    button.addEventListener('click', () => {
      if (input.value.trim()) void this.startSession(input.value.trim());
    });
    this.root.append(
      el('section', { class: 'screen login' }, [
        el('h1', {}, ['Prompting practice']),
        input,
        button,
      ]),
    );
  }

  render(): void {
    const { view, banner, pending } = this.store.current;
    if (!view) return;
    this.root.replaceChildren();
    if (banner) {
      this.root.append(el('div', { class: 'banner', role: 'alert' }, [banner]));
    }
    const screen = el('section', { class: `screen phase-${view.phase.toLowerCase()}` });
    this.root.append(screen);
    switch (view.phase) {
      case 'PreSurvey':
        this.renderSurvey(screen, 'pre');
        break;
      case 'PreTest':
      case 'PostTest':
        this.renderTest(screen, view.phase === 'PreTest' ? 'Pre-test' : 'Post-test');
        break;
      case 'Warmup':
        this.renderWarmup(screen);
        break;
      case 'Practice':
        this.renderPractice(screen);
        break;
      case 'PostSurvey':
        this.renderSurvey(screen, 'post');
        break;
      case 'Reflection':
        this.renderReflection(screen);
        break;
      case 'Done':
        screen.append(
          el('h1', {}, ['All done!']),
          el('p', { id: 'done-message' }, ['Thanks for practicing. You can close this page.']),
        );
        break;
    }
    if (pending) {
      this.root.append(el('div', { class: 'pending', 'data-pending': '1' }, ['Working…']));
    }
  }

  private renderSurvey(screen: HTMLElement, which: 'pre' | 'post'): void {
    const items = which === 'pre' ? this.surveyPayload.pre_survey : this.surveyPayload.post_survey;
    this.likertAnswers = {};
    screen.append(el('h1', {}, [which === 'pre' ? 'Before we start' : 'One more question']));
    screen.append(el('p', {}, ['1 = strongly disagree / never, 5 = strongly agree / very often']));
    for (const item of items) {
      screen.append(
        likertRow(item, (value) => {
          this.likertAnswers[item.id] = value;
          submit.toggleAttribute('disabled', !likertComplete(this.likertAnswers, items.map((i) => i.id)));
        }),
      );
    }
    const submit = el('button', { id: 'submit-survey', disabled: '' }, ['Continue']);
    submit.addEventListener('click', () => void this.submitSurvey(which));
    screen.append(submit);
  }

  private renderTest(screen: HTMLElement, title: string): void {
    this.testAnswers = {};
    screen.append(el('h1', {}, [title]));
    for (const item of this.assessmentPayload.items) {
      screen.append(
        testItemRow(item, (value) => {
          this.testAnswers[item.id] = value;
        }),
      );
    }
    const submit = el('button', { id: 'submit-test' }, ['Submit answers']);
    submit.addEventListener('click', () => void this.submitTest());
    screen.append(submit);
  }

  private renderWarmup(screen: HTMLElement): void {
    screen.append(el('h1', {}, ['Warm-up']));
    screen.append(el('p', {}, ['Two quick questions about chatbots. Answer as often as you like.']));
    for (const item of this.surveyPayload.warmup) {
      screen.append(warmupCard(item, (answer) => void this.answerWarmup(item.id, answer)));
    }
    const result = this.view?.warmup_result;
    if (result) {
      const slot = screen.querySelector(`[data-feedback="${result.item_id}"]`);
      if (slot) slot.textContent = result.feedback;
    }
    const next = el('button', { id: 'start-practice' }, ['Start the practice']);
    next.addEventListener('click', () => void this.choose('next'));
    screen.append(next);
  }

  private renderPractice(screen: HTMLElement): void {
    const view = this.view!;
    const index = view.scenario_index!;
    const scenario = this.scenariosPayload.scenarios[index];
    screen.append(el('p', { class: 'progress' }, [`Practice ${index + 1} of ${this.scenariosPayload.scenarios.length}`]));
    screen.append(scenarioCard(scenario));

    const draft = this.store.draft(index);
    const editor = el('textarea', {
      id: 'prompt-editor',
      rows: '6',
      placeholder: 'Write your prompt to the AI chatbot here…',
    }) as HTMLTextAreaElement;
    editor.value = draft;
    editor.addEventListener('input', () => {
      this.store.current.drafts[index] = editor.value; // no re-render per keystroke
      generate.toggleAttribute('disabled', !canSubmitPrompt(view, editor.value));
    });
    const generate = el('button', { id: 'generate' }, ['Generate']);
    if (!canSubmitPrompt(view, draft)) generate.setAttribute('disabled', '');
    generate.addEventListener('click', () => {
      this.store.setDraft(index, editor.value);
      void this.generate();
    });
    screen.append(editor, generate);

    if (view.last_response) {
      screen.append(
        el('section', { class: 'response-panel', id: 'response-panel' }, [
          el('h3', {}, ['Chatbot response']),
          el('p', {}, [view.last_response]),
        ]),
      );
    }

    const check = el('button', { id: 'check' }, ['Check my prompt']);
    // mirror of the server guard: no grading before a response is displayed
    if (!canCheckPrompt(view)) check.setAttribute('disabled', '');
    check.addEventListener('click', () => void this.check());
    screen.append(check);

    if (view.last_grade && view.step === 'Graded') {
      screen.append(
        gradePanel(view.last_grade, this.scenariosPayload.dimension_order, scenario.dimension_notes),
      );
    }

    const retry = el('button', { id: 'retry' }, ['Try another prompt']);
    const next = el('button', { id: 'next' }, ['Move on']);
    if (!canChoose(view)) {
      retry.setAttribute('disabled', '');
      next.setAttribute('disabled', '');
    }
    retry.addEventListener('click', () => void this.choose('retry'));
    next.addEventListener('click', () => void this.choose('next'));
    screen.append(retry, next);
  }

  private renderReflection(screen: HTMLElement): void {
    this.reflectionAnswers = {};
    screen.append(el('h1', {}, ['Reflection']));
    for (const item of this.surveyPayload.reflection) {
      const area = el('textarea', { rows: '3', 'data-item': item.id }) as HTMLTextAreaElement;
      area.addEventListener('input', () => {
        this.reflectionAnswers[item.id] = area.value;
      });
      screen.append(el('div', { class: 'reflection-row' }, [el('p', { class: 'stem' }, [item.stem]), area]));
    }
    const submit = el('button', { id: 'submit-reflection' }, ['Finish']);
    submit.addEventListener('click', () => void this.submitReflection());
    screen.append(submit);
  }
}

function defaultHash() {
  return {
    get(): string {
      const match = /#s=([\w-]+)/.exec(window.location.hash);
      return match ? match[1] : '';
    },
    set(value: string): void {
      window.location.hash = `s=${value}`;
    },
  };
}
