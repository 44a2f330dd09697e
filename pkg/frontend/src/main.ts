import { ApiClient } from './api';
import { App } from './app';

const baseUrl = (window as { PROMPTLIT_API?: string }).PROMPTLIT_API ?? '';
const root = document.getElementById('app');
if (!root) {
  throw new Error('missing #app mount point');
}
const app = new App(new ApiClient(baseUrl), root);
void app.boot();
